//! Repeated split/train/evaluate protocol over a manifest corpus, and report
//! emission.

use crate::media::{parse_y4m, MediaError, VideoClip};
use crate::nn::{
    build_pooling_net, train_pooling_monitored, Network, NnError, PoolingSample, TrainConfig,
};
use crate::pipeline::{clip_samples, score_samples, Ablation, PipelineConfig, PipelineError};
use crate::stats::{fit_logistic, plcc_rmse, srocc, LogisticParams, StatsError};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("need at least {need} sources, got {got}")]
    TooFewSources { need: usize, got: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("empty {0} split")]
    EmptySplit(&'static str),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Media(#[from] MediaError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Plain-text `key = value` settings; `#` starts a comment.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut values = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(HarnessError::Config(format!(
                    "line {}: expected key=value",
                    n + 1
                )));
            };
            let k = k.trim();
            if k.is_empty() {
                return Err(HarnessError::Config(format!("line {}: empty key", n + 1)));
            }
            values.insert(k.to_string(), v.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Self::parse(&std::fs::read_to_string(path).map_err(io_err(path))?)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.values.insert(key.to_string(), value.to_string());
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, HarnessError>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| HarnessError::Config(format!("{key} = {v:?}: {e}")))
            })
            .transpose()
    }

    pub fn get_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, HarnessError>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Overlay `prefix.`-keyed training settings on `base`.
    pub fn train_config(
        &self,
        prefix: &str,
        base: TrainConfig,
    ) -> Result<TrainConfig, HarnessError> {
        let k = |name: &str| format!("{prefix}.{name}");
        let c = TrainConfig {
            learning_rate: self.get_or(&k("learning_rate"), base.learning_rate)?,
            epochs: self.get_or(&k("epochs"), base.epochs)?,
            batch_size: self.get_or(&k("batch_size"), base.batch_size)?,
            beta1: self.get_or(&k("beta1"), base.beta1)?,
            beta2: self.get_or(&k("beta2"), base.beta2)?,
            eps: self.get_or(&k("eps"), base.eps)?,
            alpha: self.get_or(&k("alpha"), base.alpha)?,
            final_lr_fraction: self.get_or(&k("final_lr_fraction"), base.final_lr_fraction)?,
            seed: self.get_or(&k("seed"), base.seed)?,
        };
        c.validate()?;
        Ok(c)
    }

    /// Pipeline settings under `stack`, `frame_count`, `ablation`, `downsample`.
    pub fn pipeline_config(&self, base: PipelineConfig) -> Result<PipelineConfig, HarnessError> {
        Ok(PipelineConfig {
            stack: self.get_or("stack", base.stack)?,
            frame_count: self.get_or("frame_count", base.frame_count)?,
            ablation: self.get_or("ablation", base.ablation)?,
            downsample: self.get_or("downsample", base.downsample)?,
        })
    }

    /// Experiment settings; `ratios` is three comma-separated numbers and
    /// `ablations` a comma-separated list.
    pub fn experiment_config(&self) -> Result<ExperimentConfig, HarnessError> {
        let d = ExperimentConfig::default();
        let ratios = match self.raw("ratios") {
            None => d.ratios,
            Some(v) => {
                let parts: Vec<f64> = v
                    .split(',')
                    .map(|p| p.trim().parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| HarnessError::Config(format!("ratios = {v:?}: {e}")))?;
                <[f64; 3]>::try_from(parts).map_err(|_| {
                    HarnessError::Config(format!("ratios = {v:?}: need three values"))
                })?
            }
        };
        let ablations = match self.raw("ablations") {
            None => d.ablations,
            Some(v) => v
                .split(',')
                .map(|p| p.trim().parse::<Ablation>())
                .collect::<Result<_, _>>()
                .map_err(|e| HarnessError::Config(format!("ablations = {v:?}: {e}")))?,
        };
        let c = ExperimentConfig {
            ratios,
            repeats: self.get_or("repeats", d.repeats)?,
            pipeline: self.pipeline_config(d.pipeline)?,
            ablations,
            pooling_width: self.get_or("pooling_width", d.pooling_width)?,
            train: self.train_config("pooling", d.train)?,
            seed: self.get_or("seed", d.seed)?,
            threads: self.get_or("threads", d.threads)?,
        };
        c.validate()?;
        Ok(c)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

pub const MIN_SOURCES: usize = 5;

/// Shuffle source indices with `seed` and cut them by `ratios`
/// (train, val, test). Val and test get `floor(n * r)`; the remainder goes
/// to train.
pub fn make_splits(sources: usize, ratios: [f64; 3], seed: u64) -> Result<Splits, HarnessError> {
    if sources < MIN_SOURCES {
        return Err(HarnessError::TooFewSources {
            need: MIN_SOURCES,
            got: sources,
        });
    }
    if ratios.iter().any(|r| !(0.0..=1.0).contains(r))
        || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-6
    {
        return Err(HarnessError::Config(format!(
            "split ratios {ratios:?} must be in [0, 1] and sum to 1"
        )));
    }
    let n_val = (sources as f64 * ratios[1] + 1e-9).floor() as usize;
    let n_test = (sources as f64 * ratios[2] + 1e-9).floor() as usize;
    let mut order: Vec<usize> = (0..sources).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = sources - n_val - n_test;
    Ok(Splits {
        train: order[..n_train].to_vec(),
        val: order[n_train..n_train + n_val].to_vec(),
        test: order[n_train + n_val..].to_vec(),
    })
}

/// One source and its rated transcodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub source: PathBuf,
    pub transcoded: Vec<PathBuf>,
    pub mos: Vec<f64>,
}

/// Read a JSON manifest; relative paths are resolved against its directory.
pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut entries: Vec<ManifestEntry> = serde_json::from_str(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    for (i, e) in entries.iter_mut().enumerate() {
        if e.transcoded.len() != e.mos.len() {
            return Err(HarnessError::Manifest(format!(
                "entry {i}: {} transcodes but {} scores",
                e.transcoded.len(),
                e.mos.len()
            )));
        }
        if e.transcoded.is_empty() {
            return Err(HarnessError::Manifest(format!(
                "entry {i} has no transcodes"
            )));
        }
        for p in std::iter::once(&mut e.source).chain(e.transcoded.iter_mut()) {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
    Ok(entries)
}

#[derive(Clone, Debug)]
pub struct CorpusSource {
    pub name: String,
    pub source: VideoClip,
    pub transcoded: Vec<VideoClip>,
    pub mos: Vec<f64>,
}

pub fn read_clip(path: &Path) -> Result<VideoClip, HarnessError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    Ok(parse_y4m(&bytes)?)
}

/// Load every clip a manifest names (Y4M).
pub fn load_corpus(entries: &[ManifestEntry]) -> Result<Vec<CorpusSource>, HarnessError> {
    entries
        .iter()
        .map(|e| {
            Ok(CorpusSource {
                name: e.source.display().to_string(),
                source: read_clip(&e.source)?,
                transcoded: e
                    .transcoded
                    .iter()
                    .map(|p| read_clip(p))
                    .collect::<Result<_, _>>()?,
                mos: e.mos.clone(),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub ratios: [f64; 3],
    pub repeats: usize,
    pub pipeline: PipelineConfig,
    /// Compared configurations; each repeat shares its split across them.
    pub ablations: Vec<Ablation>,
    pub pooling_width: usize,
    pub train: TrainConfig,
    pub seed: u64,
    pub threads: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            ratios: [0.6, 0.2, 0.2],
            repeats: 20,
            pipeline: PipelineConfig::default(),
            ablations: vec![Ablation::Full],
            pooling_width: 16,
            train: TrainConfig::pooling(),
            seed: 0,
            threads: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.repeats == 0 {
            return Err(HarnessError::Config("repeats must be at least 1".into()));
        }
        if self.ablations.is_empty() {
            return Err(HarnessError::Config("no configurations to run".into()));
        }
        if self.threads == 0 {
            return Err(HarnessError::Config("threads must be at least 1".into()));
        }
        if !self.pipeline.downsample.is_power_of_two() {
            return Err(HarnessError::Config(format!(
                "downsample factor must be a power of two, got {}",
                self.pipeline.downsample
            )));
        }
        self.train.validate()?;
        make_splits(MIN_SOURCES.max(10), self.ratios, 0).map(|_| ())
    }

    /// Seed of repeat `r`; also seeds that repeat's pooling-net init.
    pub fn repeat_seed(&self, r: usize) -> u64 {
        self.seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(r as u64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepeatRow {
    pub repeat: usize,
    pub ablation: Ablation,
    pub seed: u64,
    /// 0-based epoch of the checkpoint with the best validation SROCC.
    pub best_epoch: usize,
    pub val_srocc: f64,
    pub srocc: f64,
    pub plcc: f64,
    pub rmse: f64,
    pub fit: LogisticParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub ablation: Ablation,
    pub runs: usize,
    pub srocc_mean: f64,
    pub srocc_std: f64,
    pub plcc_mean: f64,
    pub plcc_std: f64,
    pub rmse_mean: f64,
    pub rmse_std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub sources: usize,
    pub rows: Vec<RepeatRow>,
    pub aggregates: Vec<Aggregate>,
}

/// Mean and population standard deviation.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64;
    (m, var.sqrt())
}

/// Recompute per-configuration mean and std from the rows.
pub fn aggregate(rows: &[RepeatRow], ablations: &[Ablation]) -> Vec<Aggregate> {
    ablations
        .iter()
        .map(|&a| {
            let pick = |f: fn(&RepeatRow) -> f64| -> Vec<f64> {
                rows.iter().filter(|r| r.ablation == a).map(f).collect()
            };
            let (srocc_mean, srocc_std) = mean_std(&pick(|r| r.srocc));
            let (plcc_mean, plcc_std) = mean_std(&pick(|r| r.plcc));
            let (rmse_mean, rmse_std) = mean_std(&pick(|r| r.rmse));
            Aggregate {
                ablation: a,
                runs: rows.iter().filter(|r| r.ablation == a).count(),
                srocc_mean,
                srocc_std,
                plcc_mean,
                plcc_std,
                rmse_mean,
                rmse_std,
            }
        })
        .collect()
}

/// Frame samples of every transcode, per source, for one configuration.
/// The generator is frozen, so these are computed once and reused across
/// repeats.
#[derive(Clone, Debug)]
pub struct PreparedCorpus {
    pub ablation: Ablation,
    pub pipeline: PipelineConfig,
    /// `clips[source][version]` frame samples, labelled with the MOS.
    pub clips: Vec<Vec<Vec<PoolingSample>>>,
    pub mos: Vec<Vec<f64>>,
}

pub fn prepare(
    corpus: &[CorpusSource],
    generator: &mut Network<f32>,
    pipeline: &PipelineConfig,
    ablation: Ablation,
) -> Result<PreparedCorpus, HarnessError> {
    let config = PipelineConfig {
        ablation,
        ..*pipeline
    };
    let mut clips = Vec::with_capacity(corpus.len());
    for c in corpus {
        let mut versions = Vec::with_capacity(c.transcoded.len());
        for (t, &m) in c.transcoded.iter().zip(&c.mos) {
            versions.push(clip_samples(generator, &config, &c.source, t, m)?);
        }
        clips.push(versions);
    }
    Ok(PreparedCorpus {
        ablation,
        pipeline: config,
        clips,
        mos: corpus.iter().map(|c| c.mos.clone()).collect(),
    })
}

fn predict(
    net: &mut Network<f32>,
    data: &PreparedCorpus,
    sources: &[usize],
) -> Result<(Vec<f64>, Vec<f64>), HarnessError> {
    let (mut pred, mut truth) = (Vec::new(), Vec::new());
    for &s in sources {
        for (clip, &m) in data.clips[s].iter().zip(&data.mos[s]) {
            pred.push(score_samples(net, clip)?);
            truth.push(m);
        }
    }
    Ok((pred, truth))
}

/// SROCC that scores an undefined (constant) ranking as -1, so it never wins
/// checkpoint selection.
fn srocc_or_worst(x: &[f64], y: &[f64]) -> f64 {
    srocc(x, y).unwrap_or(-1.0)
}

/// One repeat of one configuration on a given split.
pub fn run_repeat(
    data: &PreparedCorpus,
    splits: &Splits,
    config: &ExperimentConfig,
    repeat: usize,
) -> Result<RepeatRow, HarnessError> {
    for (name, s) in [
        ("train", &splits.train),
        ("validation", &splits.val),
        ("test", &splits.test),
    ] {
        if s.is_empty() {
            return Err(HarnessError::EmptySplit(name));
        }
    }
    let seed = config.repeat_seed(repeat);
    let spec = build_pooling_net(
        data.pipeline.source_channels(),
        data.pipeline.transcoded_channels(),
        config.pooling_width,
    )?;
    let mut net = Network::new(spec, seed)?;
    let train: Vec<PoolingSample> = splits
        .train
        .iter()
        .flat_map(|&s| data.clips[s].iter().flatten().cloned())
        .collect();
    let mut best: Option<(f64, usize, Network<f32>)> = None;
    let mut failure = None;
    let train_config = TrainConfig {
        seed,
        ..config.train
    };
    train_pooling_monitored(&mut net, &train, &train_config, |epoch, net| {
        match predict(net, data, &splits.val) {
            Ok((p, t)) => {
                let v = srocc_or_worst(&p, &t);
                if best.as_ref().is_none_or(|b| v > b.0) {
                    best = Some((v, epoch, net.clone()));
                }
            }
            Err(e) => failure = Some(e),
        }
        Ok(())
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let (val_srocc, best_epoch, mut net) = best.expect("at least one epoch");
    let fit_sources: Vec<usize> = splits.train.iter().chain(&splits.val).copied().collect();
    let (fp, ft) = predict(&mut net, data, &fit_sources)?;
    let fit = fit_logistic(&fp, &ft)
        .map(|f| f.params)
        .unwrap_or(LogisticParams::IDENTITY);
    let (tp, tt) = predict(&mut net, data, &splits.test)?;
    let srocc = srocc_or_worst(&tp, &tt);
    let (plcc, rmse) = plcc_rmse(&tp, &tt, &fit).unwrap_or((f64::NAN, f64::NAN));
    Ok(RepeatRow {
        repeat,
        ablation: data.ablation,
        seed,
        best_epoch,
        val_srocc,
        srocc,
        plcc,
        rmse,
        fit,
    })
}

/// The full protocol: per repeat a fresh source-level split shared by all
/// configurations, pooling-net training with best-validation-SROCC
/// checkpointing, test SROCC, and PLCC/RMSE after a logistic fit on
/// train+val predictions.
pub fn run_experiment(
    corpus: &[CorpusSource],
    generator: &mut Network<f32>,
    config: &ExperimentConfig,
) -> Result<RunReport, HarnessError> {
    config.validate()?;
    let prepared: Vec<PreparedCorpus> = config
        .ablations
        .iter()
        .map(|&a| prepare(corpus, generator, &config.pipeline, a))
        .collect::<Result<_, _>>()?;
    run_prepared(&prepared, config)
}

/// [`run_experiment`] on already prepared samples.
pub fn run_prepared(
    prepared: &[PreparedCorpus],
    config: &ExperimentConfig,
) -> Result<RunReport, HarnessError> {
    config.validate()?;
    let sources = prepared.first().map_or(0, |p| p.clips.len());
    let jobs: Vec<(usize, usize)> = (0..config.repeats)
        .flat_map(|r| (0..prepared.len()).map(move |a| (r, a)))
        .collect();
    let run = |&(r, a): &(usize, usize)| -> Result<RepeatRow, HarnessError> {
        let splits = make_splits(sources, config.ratios, config.repeat_seed(r))?;
        run_repeat(&prepared[a], &splits, config, r)
    };
    let threads = config.threads.min(jobs.len()).max(1);
    let results: Vec<Result<RepeatRow, HarnessError>> = if threads == 1 {
        jobs.iter().map(run).collect()
    } else {
        // strided assignment, merged back by job index
        let mut slots: Vec<Option<Result<RepeatRow, HarnessError>>> =
            (0..jobs.len()).map(|_| None).collect();
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..threads)
                .map(|t| {
                    let jobs = &jobs;
                    let run = &run;
                    scope.spawn(move || {
                        (t..jobs.len())
                            .step_by(threads)
                            .map(|i| (i, run(&jobs[i])))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for h in handles {
                for (i, r) in h.join().expect("worker panicked") {
                    slots[i] = Some(r);
                }
            }
        });
        slots
            .into_iter()
            .map(|s| s.expect("every job ran"))
            .collect()
    };
    let rows = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let ablations: Vec<Ablation> = prepared.iter().map(|p| p.ablation).collect();
    Ok(RunReport {
        config: config.clone(),
        sources,
        aggregates: aggregate(&rows, &ablations),
        rows,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
    Plotdata,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            "plotdata" => Ok(Self::Plotdata),
            other => Err(format!("unknown report format {other:?}")),
        }
    }
}

/// Linear-interpolation quantile of sorted data (`h = (n - 1) q`).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Box-plot statistics of one metric for one configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub method: String,
    pub metric: String,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub mean: f64,
}

pub fn box_stats(report: &RunReport) -> Vec<BoxStats> {
    let mut out = Vec::new();
    for agg in &report.aggregates {
        let metrics: [(&str, fn(&RepeatRow) -> f64); 3] = [
            ("srocc", |r| r.srocc),
            ("plcc", |r| r.plcc),
            ("rmse", |r| r.rmse),
        ];
        for (name, f) in metrics {
            let mut v: Vec<f64> = report
                .rows
                .iter()
                .filter(|r| r.ablation == agg.ablation)
                .map(f)
                .collect();
            v.sort_by(f64::total_cmp);
            out.push(BoxStats {
                method: agg.ablation.name().to_string(),
                metric: name.to_string(),
                q25: quantile(&v, 0.25),
                q50: quantile(&v, 0.5),
                q75: quantile(&v, 0.75),
                mean: mean_std(&v).0,
            });
        }
    }
    out
}

/// Write `report.json`, `repeats.csv` and/or `plotdata.csv` into `dir`.
pub fn emit_report(
    report: &RunReport,
    dir: &Path,
    formats: &[ReportFormat],
) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    for f in formats {
        let path = match f {
            ReportFormat::Json => dir.join("report.json"),
            ReportFormat::Csv => dir.join("repeats.csv"),
            ReportFormat::Plotdata => dir.join("plotdata.csv"),
        };
        let bytes = match f {
            ReportFormat::Json => serde_json::to_vec_pretty(report)?,
            ReportFormat::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record([
                    "repeat",
                    "method",
                    "seed",
                    "best_epoch",
                    "val_srocc",
                    "srocc",
                    "plcc",
                    "rmse",
                ])
                .and_then(|_| {
                    for r in &report.rows {
                        w.write_record(&[
                            r.repeat.to_string(),
                            r.ablation.name().to_string(),
                            r.seed.to_string(),
                            r.best_epoch.to_string(),
                            r.val_srocc.to_string(),
                            r.srocc.to_string(),
                            r.plcc.to_string(),
                            r.rmse.to_string(),
                        ])?;
                    }
                    Ok(())
                })
                .map_err(|e| HarnessError::Manifest(e.to_string()))?;
                w.into_inner()
                    .map_err(|e| HarnessError::Manifest(e.to_string()))?
            }
            ReportFormat::Plotdata => {
                let mut w = csv::Writer::from_writer(Vec::new());
                for b in box_stats(report) {
                    w.serialize(&b)
                        .map_err(|e| HarnessError::Manifest(e.to_string()))?;
                }
                w.into_inner()
                    .map_err(|e| HarnessError::Manifest(e.to_string()))?
            }
        };
        std::fs::write(&path, bytes).map_err(io_err(&path))?;
        written.push(path);
    }
    Ok(written)
}

pub fn load_report(path: &Path) -> Result<RunReport, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    Ok(serde_json::from_str(&text)?)
}
