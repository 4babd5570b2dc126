//! The decode path shared by offline evaluation, the stream service and the
//! C ABI: raw trial → crop → preprocessing → leading window → classifier.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    build_references, cca_scores, ecca_scores, fbcca_scores, FilterBank, ReferenceSignals,
    SubbandSpec, Templates,
};
use crate::cstl::{reconstruct_targets, ExchangeConfig};
use crate::error::{Error, Result};
use crate::fuzzy::{
    self, fft_features, FeatureConfig, FeatureMatrix, FuzzyModel, Prediction, TrainConfig,
};
use crate::signal::{
    discard_head, first_window, sliding_windows, Epoch, FrequencyTable, Preprocess, StimulusSpec,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Pipeline {
    pub preprocess: Preprocess,
    pub window_s: f64,
}

impl Default for Pipeline {
    fn default() -> Self {
        Self {
            preprocess: Preprocess::default(),
            window_s: 1.0,
        }
    }
}

impl Pipeline {
    /// Raw samples consumed per decision.
    pub fn raw_len(&self, fs_hz: f64) -> usize {
        self.preprocess.raw_len_for(self.window_s, fs_hz)
    }

    /// The window a decoder sees for one raw trial. Only the first
    /// [`Pipeline::raw_len`] samples are used.
    pub fn window(&self, raw: &Epoch) -> Result<Epoch> {
        let need = self.raw_len(raw.fs_hz);
        if raw.n_samples() < need {
            return Err(Error::invalid(format!(
                "trial {} has {} samples, a {} s window needs {need}",
                raw.trial_id,
                raw.n_samples(),
                self.window_s
            )));
        }
        let crop = if raw.n_samples() == need {
            raw.clone()
        } else {
            raw.slice(0, need)?
        };
        first_window(&self.preprocess.apply(&crop)?, self.window_s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Fuzzy decoder trained on source trials plus EMD-reconstructed targets.
    Fuzzy,
    Cca,
    Fbcca,
    /// Source templates; sinusoidal-model templates for target classes.
    Ecca,
    /// Target templates averaged from EMD-reconstructed trials.
    EmdEcca,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Fuzzy,
        Method::Cca,
        Method::Fbcca,
        Method::Ecca,
        Method::EmdEcca,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Fuzzy => "fuzzy",
            Method::Cca => "cca",
            Method::Fbcca => "fbcca",
            Method::Ecca => "ecca",
            Method::EmdEcca => "emd-ecca",
        }
    }

    /// Whether fitting draws on the seed.
    pub fn is_stochastic(self) -> bool {
        self == Method::Fuzzy
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown method '{s}'")))
    }
}

/// Everything needed to fit any decoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecoderSettings {
    pub pipeline: Pipeline,
    pub features: FeatureConfig,
    pub exchange: ExchangeConfig,
    pub train: TrainConfig,
    /// Extra training windows every `stride` seconds along each trial;
    /// `None` keeps only the leading window.
    pub train_stride_s: Option<f64>,
    pub ref_harmonics: usize,
    pub subbands: SubbandSpec,
}

impl Default for DecoderSettings {
    fn default() -> Self {
        Self {
            pipeline: Pipeline::default(),
            features: FeatureConfig::default(),
            exchange: ExchangeConfig::default(),
            train: TrainConfig::default(),
            train_stride_s: None,
            ref_harmonics: 5,
            subbands: SubbandSpec::default(),
        }
    }
}

/// Preprocessed training windows: real source ones and those rebuilt for
/// the target classes.
#[derive(Debug, Clone)]
pub struct CstlWindows {
    pub source: Vec<Epoch>,
    pub rebuilt: Vec<Epoch>,
}

/// Filters each source trial at full length, rebuilds it for every class
/// outside `source_classes`, then cuts windows from both.
pub fn cstl_windows(
    raw_trials: &[Epoch],
    table: &FrequencyTable,
    source_classes: &[usize],
    settings: &DecoderSettings,
    stride_s: Option<f64>,
) -> Result<CstlWindows> {
    let pre = &settings.pipeline.preprocess;
    let full = Preprocess {
        discard_s: 0.0,
        ..pre.clone()
    };
    let targets: Vec<StimulusSpec> = table
        .iter()
        .filter(|s| !source_classes.contains(&s.class_index))
        .copied()
        .collect();
    let cut = |e: &Epoch| -> Result<Vec<Epoch>> {
        let e = discard_head(e, pre.discard_s)?;
        match stride_s {
            Some(s) => sliding_windows(&e, settings.pipeline.window_s, s),
            None => Ok(vec![first_window(&e, settings.pipeline.window_s)?]),
        }
    };
    let per_trial: Vec<(Vec<Epoch>, Vec<Epoch>)> = raw_trials
        .par_iter()
        .map(|raw| {
            if !source_classes.contains(&raw.stimulus.class_index) {
                return Err(Error::invalid(format!(
                    "trial {} of class {} is not a source trial",
                    raw.trial_id, raw.stimulus.class_index
                )));
            }
            let filtered = full.apply(raw)?;
            let rebuilt = if targets.is_empty() {
                Vec::new()
            } else {
                reconstruct_targets(&filtered, &targets, &settings.exchange, table)?
            };
            let mut rebuilt_windows = Vec::new();
            for r in &rebuilt {
                rebuilt_windows.extend(cut(r)?);
            }
            Ok((cut(&filtered)?, rebuilt_windows))
        })
        .collect::<Result<_>>()?;
    let mut out = CstlWindows {
        source: Vec::new(),
        rebuilt: Vec::new(),
    };
    for (s, r) in per_trial {
        out.source.extend(s);
        out.rebuilt.extend(r);
    }
    Ok(out)
}

/// Settings stored alongside a fuzzy model so a checkpoint is
/// self-describing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoderMeta {
    pub fs_hz: f64,
    pub n_channels: usize,
    pub pipeline: Pipeline,
    pub features: FeatureConfig,
    pub freqs_hz: Vec<f64>,
    pub phases_rad: Vec<f64>,
}

impl DecoderMeta {
    pub fn table(&self) -> Result<FrequencyTable> {
        if self.freqs_hz.len() != self.phases_rad.len() {
            return Err(Error::invalid("frequency and phase lists differ in length"));
        }
        FrequencyTable::new(
            self.freqs_hz
                .iter()
                .zip(&self.phases_rad)
                .enumerate()
                .map(|(i, (f, p))| StimulusSpec::new(*f, *p, i))
                .collect::<Result<_>>()?,
        )
    }
}

/// A trained fuzzy model plus the pipeline that feeds it.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyDecoder {
    pub model: FuzzyModel,
    pub meta: DecoderMeta,
}

impl FuzzyDecoder {
    pub fn new(model: FuzzyModel, meta: DecoderMeta) -> Result<Self> {
        let table = meta.table()?;
        if table.len() != model.dims.n_classes {
            return Err(Error::Dimension(format!(
                "model has {} classes, table has {}",
                model.dims.n_classes,
                table.len()
            )));
        }
        Ok(Self { model, meta })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let meta =
            serde_json::to_string(&self.meta).map_err(|e| Error::format(path, e.to_string()))?;
        fuzzy::write_model(&self.model, &meta, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (model, meta) = fuzzy::read_model(path)?;
        let meta: DecoderMeta =
            serde_json::from_str(&meta).map_err(|e| Error::format(path, e.to_string()))?;
        Self::new(model, meta).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn features(&self, window: &Epoch) -> Result<FeatureMatrix> {
        fft_features(window, &self.meta.features)
    }

    pub fn classify_window(&self, window: &Epoch) -> Result<Prediction> {
        self.model.predict(&self.features(window)?)
    }

    pub fn classify_raw(&self, raw: &Epoch) -> Result<Prediction> {
        if raw.fs_hz != self.meta.fs_hz || raw.n_channels() != self.meta.n_channels {
            return Err(Error::Dimension(format!(
                "decoder expects {} channels at {} Hz, got {} at {} Hz",
                self.meta.n_channels,
                self.meta.fs_hz,
                raw.n_channels(),
                raw.fs_hz
            )));
        }
        self.classify_window(&self.meta.pipeline.window(raw)?)
    }

    pub fn raw_len(&self) -> usize {
        self.meta.pipeline.raw_len(self.meta.fs_hz)
    }
}

/// Any fitted decoder.
#[derive(Debug, Clone)]
pub enum FittedDecoder {
    Fuzzy(FuzzyDecoder),
    Cca {
        pipeline: Pipeline,
        refs: ReferenceSignals,
    },
    Fbcca {
        pipeline: Pipeline,
        refs: ReferenceSignals,
        bank: FilterBank,
    },
    Ecca {
        pipeline: Pipeline,
        refs: ReferenceSignals,
        templates: Templates,
    },
}

/// Fit result with the training loss curve (empty for training-free
/// decoders).
#[derive(Debug, Clone)]
pub struct Fitted {
    pub decoder: FittedDecoder,
    pub loss_curve: Vec<f64>,
}

fn common_shape(trials: &[Epoch]) -> Result<(f64, usize)> {
    let first = trials
        .first()
        .ok_or_else(|| Error::invalid("no training trials"))?;
    if trials
        .iter()
        .any(|e| e.fs_hz != first.fs_hz || e.n_channels() != first.n_channels())
    {
        return Err(Error::Dimension(
            "training trials differ in rate or channel count".into(),
        ));
    }
    Ok((first.fs_hz, first.n_channels()))
}

fn window_samples(pipeline: &Pipeline, fs_hz: f64) -> usize {
    (pipeline.window_s * fs_hz).round() as usize
}

impl FittedDecoder {
    /// Fits `method` on raw source trials. `seed` drives every random
    /// choice inside fitting.
    pub fn fit(
        method: Method,
        raw_trials: &[Epoch],
        table: &FrequencyTable,
        source_classes: &[usize],
        settings: &DecoderSettings,
        seed: u64,
    ) -> Result<Fitted> {
        let (fs_hz, n_channels) = common_shape(raw_trials)?;
        let pipeline = settings.pipeline.clone();
        let n_win = window_samples(&pipeline, fs_hz);
        let refs = || build_references(table, settings.ref_harmonics, fs_hz, n_win);
        let decoder = match method {
            Method::Cca => FittedDecoder::Cca {
                pipeline,
                refs: refs()?,
            },
            Method::Fbcca => FittedDecoder::Fbcca {
                pipeline,
                refs: refs()?,
                bank: settings.subbands.bank(fs_hz)?,
            },
            Method::Ecca => {
                let windows = raw_trials
                    .iter()
                    .map(|e| pipeline.window(e))
                    .collect::<Result<Vec<_>>>()?;
                let mut templates = Templates::from_epochs(&windows, table.len())?;
                templates.fill_missing_with_sinusoids(
                    table,
                    settings.exchange.n_harmonics,
                    fs_hz,
                    n_channels,
                    n_win,
                );
                FittedDecoder::Ecca {
                    pipeline,
                    refs: refs()?,
                    templates,
                }
            }
            Method::EmdEcca => {
                let w = cstl_windows(raw_trials, table, source_classes, settings, None)?;
                let source = raw_trials
                    .iter()
                    .map(|e| pipeline.window(e))
                    .collect::<Result<Vec<_>>>()?;
                let templates =
                    Templates::from_epochs(source.iter().chain(&w.rebuilt), table.len())?;
                FittedDecoder::Ecca {
                    pipeline,
                    refs: refs()?,
                    templates,
                }
            }
            Method::Fuzzy => {
                let w = cstl_windows(
                    raw_trials,
                    table,
                    source_classes,
                    settings,
                    settings.train_stride_s,
                )?;
                let samples = w
                    .source
                    .iter()
                    .chain(&w.rebuilt)
                    .map(|e| Ok((fft_features(e, &settings.features)?, e.stimulus.class_index)))
                    .collect::<Result<Vec<_>>>()?;
                let cfg = TrainConfig {
                    seed,
                    batch_size: settings.train.batch_size.min(samples.len()),
                    ..settings.train.clone()
                };
                let out = fuzzy::train(&samples, table.len(), &cfg)?;
                let mut model = out.model;
                model.round_to_f32();
                let meta = DecoderMeta {
                    fs_hz,
                    n_channels,
                    pipeline,
                    features: settings.features,
                    freqs_hz: table.iter().map(|s| s.freq_hz).collect(),
                    phases_rad: table.iter().map(|s| s.phase_rad).collect(),
                };
                return Ok(Fitted {
                    decoder: FittedDecoder::Fuzzy(FuzzyDecoder::new(model, meta)?),
                    loss_curve: out.loss_curve,
                });
            }
        };
        Ok(Fitted {
            decoder,
            loss_curve: Vec::new(),
        })
    }

    pub fn pipeline(&self) -> &Pipeline {
        match self {
            FittedDecoder::Fuzzy(d) => &d.meta.pipeline,
            FittedDecoder::Cca { pipeline, .. }
            | FittedDecoder::Fbcca { pipeline, .. }
            | FittedDecoder::Ecca { pipeline, .. } => pipeline,
        }
    }

    pub fn classify_raw(&self, raw: &Epoch) -> Result<Prediction> {
        let scores = match self {
            FittedDecoder::Fuzzy(d) => return d.classify_raw(raw),
            FittedDecoder::Cca { pipeline, refs } => cca_scores(&pipeline.window(raw)?, refs)?,
            FittedDecoder::Fbcca {
                pipeline,
                refs,
                bank,
            } => fbcca_scores(&pipeline.window(raw)?, refs, bank)?,
            FittedDecoder::Ecca {
                pipeline,
                refs,
                templates,
            } => ecca_scores(&pipeline.window(raw)?, templates, refs)?,
        };
        Ok(Prediction::from_logits(scores))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{generate_ssvep, SsvepParams};

    fn trials(table: &FrequencyTable, classes: &[usize], per_class: u32, sigma: f64) -> Vec<Epoch> {
        let p = SsvepParams {
            harmonic_amps: vec![1.0, 0.5],
            fs_hz: 250.0,
            duration_s: 2.0,
            noise_sigma: sigma,
            channel_gains: vec![1.0, 0.7],
        };
        let mut out = Vec::new();
        for &c in classes {
            for t in 0..per_class {
                out.push(
                    generate_ssvep(*table.get(c).unwrap(), &p, c as u32 * 100 + t, 11).unwrap(),
                );
            }
        }
        out
    }

    #[test]
    fn window_uses_only_the_leading_samples() {
        let table = FrequencyTable::from_freqs(&[10.0], 0.0).unwrap();
        let raw = &trials(&table, &[0], 1, 0.1)[0];
        let pipe = Pipeline::default();
        let w = pipe.window(raw).unwrap();
        assert_eq!(w.n_samples(), 250);
        let crop = raw.slice(0, pipe.raw_len(250.0)).unwrap();
        assert_eq!(pipe.window(&crop).unwrap(), w);
        let short = raw.slice(0, 100).unwrap();
        assert!(pipe.window(&short).is_err());
    }

    #[test]
    fn method_names_roundtrip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("trca".parse::<Method>().is_err());
    }

    #[test]
    fn cstl_window_counts() {
        let table = FrequencyTable::from_freqs(&[8.0, 9.0, 10.0, 11.0], 0.3).unwrap();
        let raw = trials(&table, &[0, 2], 2, 0.1);
        let w = cstl_windows(&raw, &table, &[0, 2], &DecoderSettings::default(), None).unwrap();
        assert_eq!(w.source.len(), 4);
        assert_eq!(w.rebuilt.len(), 8);
        assert!(w
            .rebuilt
            .iter()
            .all(|e| [1, 3].contains(&e.stimulus.class_index)));
        let strided = cstl_windows(
            &raw,
            &table,
            &[0, 2],
            &DecoderSettings::default(),
            Some(0.25),
        )
        .unwrap();
        // 1.86 s remain after the discard: four 1 s windows at a 0.25 s stride.
        assert_eq!(strided.source.len(), 4 * 4);
    }

    #[test]
    fn fuzzy_decoder_checkpoint_roundtrip() {
        let table = FrequencyTable::from_freqs(&[8.0, 9.0, 10.0, 11.0], 0.3).unwrap();
        let raw = trials(&table, &[0, 2], 3, 0.1);
        let settings = DecoderSettings {
            train: TrainConfig {
                epochs_max: 3,
                d_hidden: 16,
                ..TrainConfig::default()
            },
            ..DecoderSettings::default()
        };
        let fitted =
            FittedDecoder::fit(Method::Fuzzy, &raw, &table, &[0, 2], &settings, 5).unwrap();
        let FittedDecoder::Fuzzy(dec) = &fitted.decoder else {
            panic!("fuzzy expected")
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.fuzz");
        dec.save(&path).unwrap();
        let back = FuzzyDecoder::load(&path).unwrap();
        assert_eq!(&back, dec);
        let probe = &raw[1];
        assert_eq!(
            back.classify_raw(probe).unwrap().logits,
            fitted.decoder.classify_raw(probe).unwrap().logits
        );
    }
}
