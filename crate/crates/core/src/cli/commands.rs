use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use ssvep_cstl::artifacts::dataset_files;
use ssvep_cstl::cstl::{build_training_set, ExchangeConfig};
use ssvep_cstl::decoder::{DecoderSettings, FittedDecoder, FuzzyDecoder, Method};
use ssvep_cstl::emd::{sift_epoch, SiftConfig};
use ssvep_cstl::evaluation::{
    paired_ttest, run_experiment, run_rule_ablation, write_ablation, write_outcome,
    ExperimentConfig,
};
use ssvep_cstl::fuzzy::ParamGroup;
use ssvep_cstl::signal::io::{read_epoch_file, Dataset};
use ssvep_cstl::signal::{generate_ssvep, Epoch, FrequencyTable, Preprocess, SsvepParams};
use ssvep_cstl::stream::{stream_producer, DecodeService, FeedbackListener, ProducerOptions};
use ssvep_cstl::Error;

use super::args::*;
use super::{load_config, record_run, require, CliError, CliResult};

pub fn dispatch(cmd: Command) -> CliResult<ExitCode> {
    match cmd {
        Command::Generate(a) => generate(a),
        Command::Preprocess(a) => preprocess(a),
        Command::Emd(a) => emd(a),
        Command::Reconstruct(a) => reconstruct(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a, false),
        Command::Baseline(a) => evaluate(a, true),
        Command::Stream(a) => stream(a),
        Command::Serve(a) => serve(a),
        Command::Listen(a) => listen(a),
        Command::Ttest(a) => ttest(a),
    }
}

/// True if the config file sets `key` at top level.
fn file_sets(path: Option<&Path>, key: &str) -> bool {
    path.and_then(|p| fs::read_to_string(p).ok())
        .and_then(|t| t.parse::<toml::Table>().ok())
        .is_some_and(|t| t.contains_key(key))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e).into())
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let text =
        serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e.to_string()))?;
    write_text(path, &(text + "\n"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct GenerateConfig {
    seed: Option<u64>,
    freqs_hz: Vec<f64>,
    phase_step_rad: f64,
    trials: usize,
    duration_s: f64,
    fs_hz: f64,
    noise_sigma: f64,
    channel_gains: Vec<f64>,
    harmonic_amps: Vec<f64>,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            seed: None,
            freqs_hz: (8..16).map(f64::from).collect(),
            phase_step_rad: 0.35 * std::f64::consts::PI,
            trials: 6,
            duration_s: 4.0,
            fs_hz: 250.0,
            noise_sigma: 0.3,
            channel_gains: vec![1.0, 0.8, 0.6, 0.4],
            harmonic_amps: vec![1.0, 0.5],
        }
    }
}

/// Trial ids are `class · 1000 + index`, unique across the dataset.
fn synthetic_dataset(cfg: &GenerateConfig, seed: u64) -> ssvep_cstl::Result<Dataset> {
    let table = FrequencyTable::from_freqs(&cfg.freqs_hz, cfg.phase_step_rad)?;
    let params = SsvepParams {
        harmonic_amps: cfg.harmonic_amps.clone(),
        fs_hz: cfg.fs_hz,
        duration_s: cfg.duration_s,
        noise_sigma: cfg.noise_sigma,
        channel_gains: cfg.channel_gains.clone(),
    };
    let trials = table
        .iter()
        .map(|s| {
            (0..cfg.trials)
                .map(|t| generate_ssvep(*s, &params, (s.class_index * 1000 + t) as u32, seed))
                .collect()
        })
        .collect::<ssvep_cstl::Result<_>>()?;
    Dataset::new(table, trials)
}

fn generate(a: GenerateArgs) -> CliResult<ExitCode> {
    let mut cfg: GenerateConfig = load_config(a.common.config.as_deref())?;
    let out = require(a.common.out, "--out")?;
    cfg.seed = a.seed.or(cfg.seed);
    let seed = require(cfg.seed, "--seed")?;
    if let Some(v) = a.freqs {
        cfg.freqs_hz = v;
    }
    if let Some(v) = a.phase_step {
        cfg.phase_step_rad = v;
    }
    if let Some(v) = a.trials {
        cfg.trials = v;
    }
    if let Some(v) = a.duration_s {
        cfg.duration_s = v;
    }
    if let Some(v) = a.fs {
        cfg.fs_hz = v;
    }
    if let Some(v) = a.noise_sigma {
        cfg.noise_sigma = v;
    }
    if let Some(v) = a.gains {
        cfg.channel_gains = v;
    }
    if let Some(v) = a.harmonics {
        cfg.harmonic_amps = v;
    }
    let data = synthetic_dataset(&cfg, seed)?;
    let manifest = data.save(&out)?;
    record_run(&out, "generate", Some(seed), &cfg, &[])?;
    println!("{}", manifest.display());
    Ok(ExitCode::SUCCESS)
}

fn preprocess(a: PreprocessArgs) -> CliResult<ExitCode> {
    let mut cfg: Preprocess = load_config(a.common.config.as_deref())?;
    let out = require(a.common.out, "--out")?;
    let manifest = require(a.manifest, "--manifest")?;
    if let Some(b) = a.band {
        cfg.band = Some((b[0], b[1]));
    }
    if a.no_band {
        cfg.band = None;
    }
    if let Some(q) = a.notch_q {
        cfg.notch_q = Some(q);
    }
    if a.no_notch {
        cfg.notch_q = None;
    }
    if let Some(d) = a.discard_s {
        cfg.discard_s = d;
    }
    let data = Dataset::load(&manifest)?;
    let trials = data
        .trials
        .iter()
        .map(|g| g.iter().map(|e| cfg.apply(e)).collect())
        .collect::<ssvep_cstl::Result<_>>()?;
    let path = Dataset::new(data.table, trials)?.save(&out)?;
    record_run(&out, "preprocess", None, &cfg, &dataset_files(&manifest)?)?;
    println!("{}", path.display());
    Ok(ExitCode::SUCCESS)
}

fn emd(a: EmdArgs) -> CliResult<ExitCode> {
    let mut cfg: SiftConfig = load_config(a.common.config.as_deref())?;
    let out = require(a.common.out, "--out")?;
    let input = require(a.input, "--input")?;
    if let Some(v) = a.max_imfs {
        cfg.max_imfs = v;
    }
    if let Some(v) = a.sd_stop {
        cfg.sd_stop = v;
    }
    let e = read_epoch_file(&input)?;
    let sets = sift_epoch(&e, &cfg)?;
    fs::create_dir_all(&out).map_err(|err| Error::io(&out, err))?;
    for (c, s) in sets.iter().enumerate() {
        let mut text = String::from("t_s");
        for k in 1..=s.len() {
            let _ = write!(text, ",imf{k}");
        }
        text.push_str(",residue\n");
        for t in 0..s.signal_len() {
            let _ = write!(text, "{:.6}", t as f64 / e.fs_hz);
            for imf in &s.imfs {
                let _ = write!(text, ",{:.9e}", imf[t]);
            }
            let _ = writeln!(text, ",{:.9e}", s.residue[t]);
        }
        write_text(&out.join(format!("imfs_ch{c}.csv")), &text)?;
        println!("channel {c}: {} IMFs", s.len());
    }
    record_run(&out, "emd", None, &cfg, &[input])?;
    Ok(ExitCode::SUCCESS)
}

fn reconstruct(a: ReconstructArgs) -> CliResult<ExitCode> {
    let mut cfg: ExchangeConfig = load_config(a.common.config.as_deref())?;
    let out = require(a.common.out, "--out")?;
    let manifest = require(a.manifest, "--manifest")?;
    let sources = require(a.source_classes, "--source-classes")?;
    if let Some(v) = a.n_harmonics {
        cfg.n_harmonics = v;
    }
    let data = Dataset::load(&manifest)?;
    if let Some(c) = sources.iter().find(|c| **c >= data.table.len()) {
        return Err(CliError::Usage(format!(
            "source class {c} outside the table"
        )));
    }
    let epochs: Vec<Epoch> = sources
        .iter()
        .flat_map(|c| data.trials[*c].iter().cloned())
        .collect();
    let built = build_training_set(&epochs, &data.table, &sources, &cfg)?;
    let mut groups = vec![Vec::new(); data.table.len()];
    for e in built {
        groups[e.stimulus.class_index].push(e);
    }
    let path = Dataset::new(data.table, groups)?.save(&out)?;
    #[derive(Serialize)]
    struct Resolved<'a> {
        source_classes: &'a [usize],
        exchange: &'a ExchangeConfig,
    }
    record_run(
        &out,
        "reconstruct",
        None,
        &Resolved {
            source_classes: &sources,
            exchange: &cfg,
        },
        &dataset_files(&manifest)?,
    )?;
    println!("{}", path.display());
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TrainCommandConfig {
    seed: Option<u64>,
    source_classes: Option<Vec<usize>>,
    decoder: DecoderSettings,
}

fn train(a: TrainArgs) -> CliResult<ExitCode> {
    let mut cfg: TrainCommandConfig = load_config(a.common.config.as_deref())?;
    let out = require(a.common.out, "--out")?;
    let manifest = require(a.manifest, "--manifest")?;
    cfg.seed = a.seed.or(cfg.seed);
    let seed = require(cfg.seed, "--seed")?;
    if let Some(v) = a.rules {
        cfg.decoder.train.rules = v;
    }
    if let Some(v) = a.epochs {
        cfg.decoder.train.epochs_max = v;
    }
    if let Some(v) = a.lr {
        cfg.decoder.train.lr = v;
    }
    if let Some(v) = a.window_s {
        cfg.decoder.pipeline.window_s = v;
    }
    if let Some(v) = a.source_classes {
        cfg.source_classes = Some(v);
    }
    let data = Dataset::load(&manifest)?;
    let sources: Vec<usize> = cfg
        .source_classes
        .clone()
        .unwrap_or_else(|| (0..data.table.len()).collect());
    if let Some(c) = sources.iter().find(|c| **c >= data.table.len()) {
        return Err(CliError::Usage(format!(
            "source class {c} outside the table"
        )));
    }
    let raw: Vec<Epoch> = sources
        .iter()
        .flat_map(|c| data.trials[*c].iter().cloned())
        .collect();
    let fitted = FittedDecoder::fit(
        Method::Fuzzy,
        &raw,
        &data.table,
        &sources,
        &cfg.decoder,
        seed,
    )?;
    let FittedDecoder::Fuzzy(decoder) = &fitted.decoder else {
        unreachable!("fuzzy fit returns a fuzzy decoder")
    };
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let model_path = a.out_model.unwrap_or_else(|| out.join("model.fuzz"));
    decoder.save(&model_path)?;

    let mut curve = String::from("epoch,loss\n");
    for (i, l) in fitted.loss_curve.iter().enumerate() {
        let _ = writeln!(curve, "{},{:.9}", i + 1, l);
    }
    write_text(&out.join("loss_curve.csv"), &curve)?;
    write_text(&out.join("rule_centers.csv"), &centers_csv(decoder))?;
    record_run(&out, "train", Some(seed), &cfg, &dataset_files(&manifest)?)?;
    println!("{}", model_path.display());
    Ok(ExitCode::SUCCESS)
}

/// One row per rule center plus a final row with the shared λ.
fn centers_csv(d: &FuzzyDecoder) -> String {
    let dq = d.model.dims.d_query;
    let mut s = String::from("row");
    for k in 0..dq {
        let _ = write!(s, ",d{k}");
    }
    s.push('\n');
    for (r, c) in d.model.group(ParamGroup::Centers).chunks(dq).enumerate() {
        let _ = write!(s, "rule{r}");
        c.iter().for_each(|v| {
            let _ = write!(s, ",{v:.9}");
        });
        s.push('\n');
    }
    s.push_str("lambda");
    d.model.lambdas().iter().for_each(|v| {
        let _ = write!(s, ",{v:.9}");
    });
    s.push('\n');
    s
}

fn evaluate(a: EvaluateArgs, baseline_only: bool) -> CliResult<ExitCode> {
    let config_path = a.common.config.as_deref();
    let mut cfg: ExperimentConfig = load_config(config_path)?;
    let out = require(a.common.out, "--out")?;
    let manifest = require(a.manifest, "--manifest")?;
    if a.seed.is_none() && !file_sets(config_path, "seed") {
        return Err(CliError::Usage("missing required --seed".into()));
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.method {
        cfg.method = v;
    } else if baseline_only && !file_sets(config_path, "method") {
        return Err(CliError::Usage("missing required --method".into()));
    }
    if baseline_only && cfg.method == Method::Fuzzy {
        return Err(CliError::Usage(
            "baseline takes cca, fbcca, ecca or emd-ecca".into(),
        ));
    }
    if let Some(v) = a.n_source {
        cfg.n_source = v;
    }
    if let Some(v) = a.window_s {
        cfg.decoder.pipeline.window_s = v;
    }
    if let Some(v) = a.repeats {
        cfg.repeats = v;
    }
    if let Some(v) = a.rules {
        cfg.decoder.train.rules = v;
    }
    let data = Dataset::load(&manifest)?;
    let inputs = dataset_files(&manifest)?;
    let command = if baseline_only {
        "baseline"
    } else {
        "evaluate"
    };

    if let Some(rules) = a.ablate_rules {
        let report = run_rule_ablation(&data, &cfg, &rules)?;
        write_ablation(&report, &out)?;
        #[derive(Serialize)]
        struct Resolved<'a> {
            experiment: &'a ExperimentConfig,
            ablate_rules: &'a [usize],
        }
        record_run(
            &out,
            command,
            Some(cfg.seed),
            &Resolved {
                experiment: &cfg,
                ablate_rules: &rules,
            },
            &inputs,
        )?;
        for s in &report.sweeps {
            println!(
                "rules {:>2}: acc {:.4} ± {:.4} ({} failed)",
                s.rules, s.summary.acc_mean, s.summary.acc_std, s.summary.failed
            );
        }
        for c in &report.comparisons {
            match c.ttest {
                Some(t) => println!(
                    "{} vs {}: t = {:.4}, p = {:.4}",
                    c.rules_a, c.rules_b, t.t, t.p
                ),
                None => println!(
                    "{} vs {}: {}",
                    c.rules_a,
                    c.rules_b,
                    c.note.as_deref().unwrap_or("")
                ),
            }
        }
        let failed = report.sweeps.iter().any(|s| s.summary.failed > 0);
        return Ok(if failed {
            ExitCode::FAILURE
        } else {
            ExitCode::SUCCESS
        });
    }

    let outcome = run_experiment(&data, &cfg)?;
    write_outcome(&outcome, &out)?;
    record_run(&out, command, Some(cfg.seed), &cfg, &inputs)?;
    let s = &outcome.summary;
    println!(
        "{}: acc {:.4} ± {:.4}, itr {:.2} ± {:.2} bits/min, {} of {} repeats completed",
        cfg.method,
        s.acc_mean,
        s.acc_std,
        s.itr_mean,
        s.itr_std,
        s.completed,
        s.completed + s.failed
    );
    Ok(if outcome.all_completed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct StreamConfig {
    endpoint: String,
    chunk_ms: u32,
    fs_hz: Option<f64>,
    realtime: bool,
    interleave: bool,
    gap_ms: u64,
}

impl Default for StreamConfig {
    fn default() -> Self {
        Self {
            endpoint: "127.0.0.1:7400".into(),
            chunk_ms: 40,
            fs_hz: None,
            realtime: false,
            interleave: false,
            gap_ms: 0,
        }
    }
}

fn all_trials(data: &Dataset) -> CliResult<Vec<Epoch>> {
    let trials: Vec<Epoch> = data.trials.iter().flatten().cloned().collect();
    let mut ids: Vec<u32> = trials.iter().map(|e| e.trial_id).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(CliError::Usage(
            "trial ids must be unique across the dataset to stream it".into(),
        ));
    }
    Ok(trials)
}

fn stream(a: StreamArgs) -> CliResult<ExitCode> {
    let mut cfg: StreamConfig = load_config(a.common.config.as_deref())?;
    let manifest = require(a.manifest, "--manifest")?;
    if let Some(v) = a.endpoint {
        cfg.endpoint = v;
    }
    if let Some(v) = a.chunk_ms {
        cfg.chunk_ms = v;
    }
    if let Some(v) = a.fs {
        cfg.fs_hz = Some(v);
    }
    if let Some(v) = a.gap_ms {
        cfg.gap_ms = v;
    }
    cfg.realtime |= a.realtime;
    cfg.interleave |= a.interleave;
    let data = Dataset::load(&manifest)?;
    let trials = all_trials(&data)?;
    if let (Some(fs), Some(e)) = (
        cfg.fs_hz,
        trials
            .iter()
            .find(|e| (e.fs_hz - cfg.fs_hz.unwrap_or(0.0)).abs() > 1e-6),
    ) {
        return Err(CliError::Usage(format!(
            "trial {} is sampled at {} Hz, expected {fs}",
            e.trial_id, e.fs_hz
        )));
    }
    let opts = ProducerOptions {
        chunk_ms: cfg.chunk_ms,
        realtime: cfg.realtime,
        interleave: cfg.interleave,
        inter_trial_gap: Duration::from_millis(cfg.gap_ms),
    };
    let stats = stream_producer(&trials, &cfg.endpoint, &opts)?;
    println!("sent {} frames, {} bytes", stats.frames, stats.bytes);
    if let Some(out) = a.common.out {
        fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
        write_json(
            &out.join("producer_stats.json"),
            &serde_json::json!({"frames": stats.frames, "bytes": stats.bytes, "trials": trials.len()}),
        )?;
        record_run(&out, "stream", None, &cfg, &dataset_files(&manifest)?)?;
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ServeConfig {
    endpoint: String,
    feedback: String,
    window_s: Option<f64>,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self {
            endpoint: "127.0.0.1:7400".into(),
            feedback: "127.0.0.1:7401".into(),
            window_s: None,
        }
    }
}

fn serve(a: ServeArgs) -> CliResult<ExitCode> {
    let mut cfg: ServeConfig = load_config(a.common.config.as_deref())?;
    let model = require(a.model, "--model")?;
    if let Some(v) = a.endpoint {
        cfg.endpoint = v;
    }
    if let Some(v) = a.feedback {
        cfg.feedback = v;
    }
    if let Some(v) = a.window_s {
        cfg.window_s = Some(v);
    }
    let mut decoder = FuzzyDecoder::load(&model)?;
    if let Some(w) = cfg.window_s {
        if w != decoder.meta.pipeline.window_s {
            log::warn!(
                "serving {w} s windows with a model trained on {} s",
                decoder.meta.pipeline.window_s
            );
            decoder.meta.pipeline.window_s = w;
        }
    }
    let table = match &a.manifest {
        Some(m) => Some(ssvep_cstl::signal::io::DatasetManifest::read(m)?.table()?),
        None => None,
    };
    let service = DecodeService::bind(decoder, table.as_ref(), &cfg.endpoint, &cfg.feedback)?;
    eprintln!("listening on {}", service.local_addr()?);
    let stats = service.run()?;
    println!(
        "{} frames, {} malformed, {} decisions, {} incomplete trials",
        stats.frames, stats.malformed, stats.decisions, stats.incomplete
    );
    if let Some(out) = a.common.out {
        fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
        write_json(
            &out.join("service_stats.json"),
            &serde_json::json!({
                "frames": stats.frames,
                "malformed": stats.malformed,
                "decisions": stats.decisions,
                "incomplete": stats.incomplete,
            }),
        )?;
        record_run(&out, "serve", None, &cfg, &[model])?;
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ListenConfig {
    endpoint: String,
    timeout_s: f64,
}

impl Default for ListenConfig {
    fn default() -> Self {
        Self {
            endpoint: "127.0.0.1:7401".into(),
            timeout_s: 10.0,
        }
    }
}

fn listen(a: ListenArgs) -> CliResult<ExitCode> {
    let mut cfg: ListenConfig = load_config(a.common.config.as_deref())?;
    let manifest = require(a.manifest, "--manifest")?;
    if let Some(v) = a.endpoint {
        cfg.endpoint = v;
    }
    if let Some(v) = a.timeout_s {
        cfg.timeout_s = v;
    }
    if !(cfg.timeout_s > 0.0) {
        return Err(CliError::Usage("timeout must be positive".into()));
    }
    let data = Dataset::load(&manifest)?;
    let expected: Vec<(u32, usize)> = all_trials(&data)?
        .iter()
        .map(|e| (e.trial_id, e.stimulus.class_index))
        .collect();
    let listener = FeedbackListener::bind(&cfg.endpoint)?;
    eprintln!("listening on {}", listener.local_addr()?);
    let summary = listener.collect(&expected, Duration::from_secs_f64(cfg.timeout_s))?;
    println!(
        "online accuracy {:.4} over {} trials ({} missing)",
        summary.accuracy,
        expected.len(),
        summary.missing.len()
    );
    if let Some(out) = a.common.out {
        fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
        let mut csv = String::from("trial_id,class_index,confidence,inference_ms\n");
        for m in &summary.received {
            let _ = writeln!(
                csv,
                "{},{},{:.4},{:.2}",
                m.trial_id, m.class_index, m.confidence, m.inference_ms
            );
        }
        write_text(&out.join("feedback.csv"), &csv)?;
        write_json(
            &out.join("online_summary.json"),
            &serde_json::json!({"accuracy": summary.accuracy, "expected": expected.len(), "missing": summary.missing}),
        )?;
        record_run(&out, "listen", None, &cfg, &dataset_files(&manifest)?)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn sample(arg: &str) -> CliResult<Vec<f64>> {
    let text = if Path::new(arg).is_file() {
        fs::read_to_string(arg).map_err(|e| Error::io(arg, e))?
    } else {
        arg.to_owned()
    };
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| CliError::Usage(format!("'{s}' is not a number")))
        })
        .collect()
}

fn ttest(a: TtestArgs) -> CliResult<ExitCode> {
    let x = sample(&require(a.a, "--a")?)?;
    let y = sample(&require(a.b, "--b")?)?;
    let r = paired_ttest(&x, &y)?;
    println!("t = {:.6}, p = {:.6}, dof = {}", r.t, r.p, r.dof);
    if let Some(out) = a.common.out {
        fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
        write_json(&out.join("ttest.json"), &r)?;
        record_run(
            &out,
            "ttest",
            None,
            &serde_json::json!({"a": x, "b": y}),
            &[],
        )?;
    }
    Ok(ExitCode::SUCCESS)
}
