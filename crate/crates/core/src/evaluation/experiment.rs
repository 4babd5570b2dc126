use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::metrics::{accuracy, itr, mean_std, paired_ttest, TTest};
use super::split::{split_source_target, SplitPlan};
use crate::decoder::{DecoderSettings, FittedDecoder, Method};
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::signal::io::Dataset;
use crate::signal::Epoch;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub method: Method,
    /// Number of source classes `N_P`.
    pub n_source: usize,
    pub repeats: usize,
    pub seed: u64,
    pub decoder: DecoderSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            method: Method::Fuzzy,
            n_source: 4,
            repeats: 30,
            seed: 0,
            decoder: DecoderSettings::default(),
        }
    }
}

/// One test-set decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_id: u32,
    pub true_class: usize,
    pub predicted: usize,
    pub confidence: f64,
    /// Whether the true class was a source class.
    pub source_class: bool,
    pub latency_s: f64,
}

/// Result of one randomized repeat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub repeat: usize,
    pub seed: u64,
    pub split: Option<SplitPlan>,
    pub acc: f64,
    pub itr_bits_per_min: f64,
    /// Window length plus median inference latency.
    pub t_total_s: f64,
    pub median_latency_s: f64,
    pub wall_time_s: f64,
    pub final_loss: Option<f64>,
    pub trials: Vec<TrialRecord>,
    /// Set when a stage failed; metrics are then zero.
    pub error: Option<String>,
}

impl ExperimentReport {
    /// Recomputes accuracy from the per-trial rows.
    pub fn check_consistency(&self, n_classes: usize) -> Result<()> {
        if self.error.is_some() {
            return Ok(());
        }
        let preds: Vec<usize> = self.trials.iter().map(|t| t.predicted).collect();
        let truth: Vec<usize> = self.trials.iter().map(|t| t.true_class).collect();
        let acc = accuracy(&preds, &truth)?;
        let rate = itr(acc, n_classes, self.t_total_s)?;
        if acc != self.acc || (rate - self.itr_bits_per_min).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "repeat {} metrics disagree with its trials",
                self.repeat
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub acc_mean: f64,
    pub acc_std: f64,
    pub itr_mean: f64,
    pub itr_std: f64,
    pub completed: usize,
    pub failed: usize,
}

impl Summary {
    fn of(reports: &[ExperimentReport]) -> Self {
        let done: Vec<&ExperimentReport> = reports.iter().filter(|r| r.error.is_none()).collect();
        let accs: Vec<f64> = done.iter().map(|r| r.acc).collect();
        let itrs: Vec<f64> = done.iter().map(|r| r.itr_bits_per_min).collect();
        let (acc_mean, acc_std) = mean_std(&accs);
        let (itr_mean, itr_std) = mean_std(&itrs);
        Self {
            acc_mean,
            acc_std,
            itr_mean,
            itr_std,
            completed: done.len(),
            failed: reports.len() - done.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    pub tool_version: String,
    pub n_classes: usize,
    pub config: ExperimentConfig,
    pub reports: Vec<ExperimentReport>,
    pub summary: Summary,
}

fn median(mut x: Vec<f64>) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.sort_by(f64::total_cmp);
    let m = x.len() / 2;
    if x.len() % 2 == 1 {
        x[m]
    } else {
        0.5 * (x[m - 1] + x[m])
    }
}

struct RepeatOutput {
    split: SplitPlan,
    trials: Vec<TrialRecord>,
    final_loss: Option<f64>,
}

fn run_repeat(data: &Dataset, cfg: &ExperimentConfig, seed: u64) -> Result<RepeatOutput> {
    let n_trials = data.min_trials();
    let split = split_source_target(
        &data.table,
        cfg.n_source,
        n_trials,
        derive_seed(seed, "split", 0),
    )?;
    let mut train: Vec<Epoch> = Vec::new();
    let mut test: Vec<&Epoch> = Vec::new();
    for (&class, &held) in split.source.iter().zip(&split.held_out) {
        for (i, e) in data.trials[class].iter().enumerate() {
            if i == held {
                test.push(e);
            } else {
                train.push(e.clone());
            }
        }
    }
    for &class in &split.target {
        test.extend(data.trials[class].iter());
    }
    let fitted = FittedDecoder::fit(
        cfg.method,
        &train,
        &data.table,
        &split.source,
        &cfg.decoder,
        derive_seed(seed, "train", 0),
    )?;
    let mut trials = Vec::with_capacity(test.len());
    for e in test {
        let start = Instant::now();
        let pred = fitted.decoder.classify_raw(e)?;
        let latency_s = start.elapsed().as_secs_f64();
        trials.push(TrialRecord {
            trial_id: e.trial_id,
            true_class: e.stimulus.class_index,
            predicted: pred.class_index,
            confidence: pred.confidence,
            source_class: split.source.contains(&e.stimulus.class_index),
            latency_s,
        });
    }
    Ok(RepeatOutput {
        split,
        trials,
        final_loss: fitted.loss_curve.last().copied(),
    })
}

/// Runs `cfg.repeats` randomized splits. A failing repeat is recorded with
/// its error and the run continues.
pub fn run_experiment(data: &Dataset, cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let n_classes = data.table.len();
    if n_classes < 2 {
        return Err(Error::invalid("an experiment needs at least two classes"));
    }
    if cfg.repeats == 0 {
        return Err(Error::invalid("repeats must be positive"));
    }
    let window_s = cfg.decoder.pipeline.window_s;
    let mut reports = Vec::with_capacity(cfg.repeats);
    for repeat in 0..cfg.repeats {
        let seed = derive_seed(cfg.seed, "repeat", repeat as u64);
        let start = Instant::now();
        let result = run_repeat(data, cfg, seed).and_then(|out| {
            let preds: Vec<usize> = out.trials.iter().map(|t| t.predicted).collect();
            let truth: Vec<usize> = out.trials.iter().map(|t| t.true_class).collect();
            let acc = accuracy(&preds, &truth)?;
            let median_latency_s = median(out.trials.iter().map(|t| t.latency_s).collect());
            let t_total_s = window_s + median_latency_s;
            Ok((
                out,
                acc,
                itr(acc, n_classes, t_total_s)?,
                t_total_s,
                median_latency_s,
            ))
        });
        let wall_time_s = start.elapsed().as_secs_f64();
        let report = match result {
            Ok((out, acc, rate, t_total_s, median_latency_s)) => {
                log::info!("{} repeat {repeat}: acc {acc:.4}", cfg.method);
                ExperimentReport {
                    repeat,
                    seed,
                    split: Some(out.split),
                    acc,
                    itr_bits_per_min: rate,
                    t_total_s,
                    median_latency_s,
                    wall_time_s,
                    final_loss: out.final_loss,
                    trials: out.trials,
                    error: None,
                }
            }
            Err(e) => {
                log::error!("{} repeat {repeat} failed: {e}", cfg.method);
                ExperimentReport {
                    repeat,
                    seed,
                    split: None,
                    acc: 0.0,
                    itr_bits_per_min: 0.0,
                    t_total_s: window_s,
                    median_latency_s: 0.0,
                    wall_time_s,
                    final_loss: None,
                    trials: Vec::new(),
                    error: Some(format!("{}: {e}", e.kind())),
                }
            }
        };
        reports.push(report);
    }
    Ok(ExperimentOutcome {
        tool_version: env!("CARGO_PKG_VERSION").to_owned(),
        n_classes,
        config: cfg.clone(),
        summary: Summary::of(&reports),
        reports,
    })
}

pub const TRIALS_CSV_HEADER: &str =
    "repeat,trial_id,true_class,predicted,correct,source_class,confidence";

impl ExperimentOutcome {
    /// Per-trial rows without timing, so identical runs give identical
    /// bytes.
    pub fn trials_csv(&self) -> String {
        let mut out = String::from(TRIALS_CSV_HEADER);
        out.push('\n');
        for r in &self.reports {
            for t in &r.trials {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{:.6}",
                    r.repeat,
                    t.trial_id,
                    t.true_class,
                    t.predicted,
                    u8::from(t.true_class == t.predicted),
                    u8::from(t.source_class),
                    t.confidence
                );
            }
        }
        out
    }

    pub fn all_completed(&self) -> bool {
        self.summary.failed == 0
    }
}

/// Writes `report.json` and `trials.csv` into `dir`.
pub fn write_outcome(outcome: &ExperimentOutcome, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json_path = dir.join("report.json");
    let json = serde_json::to_string_pretty(outcome)
        .map_err(|e| Error::format(&json_path, e.to_string()))?;
    fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))?;
    let csv_path = dir.join("trials.csv");
    fs::write(&csv_path, outcome.trials_csv()).map_err(|e| Error::io(&csv_path, e))?;
    Ok(vec![json_path, csv_path])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSweep {
    pub rules: usize,
    pub summary: Summary,
    /// Per-repeat accuracy, `None` for failed repeats.
    pub accs: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedComparison {
    pub rules_a: usize,
    pub rules_b: usize,
    pub ttest: Option<TTest>,
    /// Why no test could be computed.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub sweeps: Vec<RuleSweep>,
    pub comparisons: Vec<PairedComparison>,
}

/// Repeats the fuzzy experiment for each rule count on the same splits and
/// compares every pair with a paired t-test over repeats both completed.
pub fn run_rule_ablation(
    data: &Dataset,
    cfg: &ExperimentConfig,
    rules: &[usize],
) -> Result<AblationReport> {
    if rules.len() < 2 {
        return Err(Error::invalid("an ablation needs at least two rule counts"));
    }
    let mut sweeps = Vec::with_capacity(rules.len());
    for &r in rules {
        let mut c = cfg.clone();
        c.method = Method::Fuzzy;
        c.decoder.train.rules = r;
        let out = run_experiment(data, &c)?;
        sweeps.push(RuleSweep {
            rules: r,
            accs: out
                .reports
                .iter()
                .map(|x| x.error.is_none().then_some(x.acc))
                .collect(),
            summary: out.summary,
        });
    }
    let mut comparisons = Vec::new();
    for i in 0..sweeps.len() {
        for j in i + 1..sweeps.len() {
            let (a, b): (Vec<f64>, Vec<f64>) = sweeps[i]
                .accs
                .iter()
                .zip(&sweeps[j].accs)
                .filter_map(|(x, y)| Some(((*x)?, (*y)?)))
                .unzip();
            let (ttest, note) = match paired_ttest(&a, &b) {
                Ok(t) => (Some(t), None),
                Err(e) => (None, Some(format!("{}: {e}", e.kind()))),
            };
            comparisons.push(PairedComparison {
                rules_a: sweeps[i].rules,
                rules_b: sweeps[j].rules,
                ttest,
                note,
            });
        }
    }
    Ok(AblationReport {
        sweeps,
        comparisons,
    })
}

/// Writes `ablation.json` and a flat `ablation_ttests.csv`.
pub fn write_ablation(report: &AblationReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json_path = dir.join("ablation.json");
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| Error::format(&json_path, e.to_string()))?;
    fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))?;
    let mut csv = String::from("rules_a,rules_b,t,p,dof,note\n");
    for c in &report.comparisons {
        match c.ttest {
            Some(t) => {
                let _ = writeln!(
                    csv,
                    "{},{},{:.6},{:.6},{},",
                    c.rules_a, c.rules_b, t.t, t.p, t.dof
                );
            }
            None => {
                let _ = writeln!(
                    csv,
                    "{},{},,,,{}",
                    c.rules_a,
                    c.rules_b,
                    c.note.as_deref().unwrap_or("")
                );
            }
        }
    }
    let csv_path = dir.join("ablation_ttests.csv");
    fs::write(&csv_path, csv).map_err(|e| Error::io(&csv_path, e))?;
    Ok(vec![json_path, csv_path])
}
