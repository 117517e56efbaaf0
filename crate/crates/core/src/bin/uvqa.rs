use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use uvqa::distort::{build_corpus, synthesize, value_noise_texture, DistortionRecipe, FirstStage};
use uvqa::features::{feature_triple, CpbdConfig, DEFAULT_BLUR_SAMPLES};
use uvqa::harness::{
    emit_report, load_corpus, load_manifest, load_report, read_clip, run_experiment, RunReport,
    Settings,
};
use uvqa::media::{read_pgm, write_pgm, Plane, TensorArchive};
use uvqa::nn::{
    build_generator, build_pooling_net, extract_patches, train_generator, train_pooling, Network,
    PatchPair, TrainConfig, DESK_GENERATOR,
};
use uvqa::pipeline::{clip_samples, predict_score, PipelineConfig};
use uvqa::quality::{
    mdsi_map, motion_map, psnr, ssim_map, vif_map, MdsiParams, SsimParams, VifParams,
    DEFAULT_PSNR_CEILING,
};
use uvqa::sampler::{
    solve_by_category, solve_exact, solve_greedy, solve_local_search, SubsetProblem,
    DEFAULT_EXACT_BUDGET,
};
use uvqa::stats::{dmos, evaluate, mos, screen_subjects, ScoreMatrix};

#[derive(Parser)]
#[command(
    name = "uvqa",
    version,
    about = "Quality assessment of transcoded user-generated video"
)]
struct Cli {
    /// Seed for every random choice (overrides `seed` in the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Plain-text key=value settings file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for repeated experiments.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// SI, TI and blur (CPBD) of each clip, as CSV.
    Features(FeaturesArgs),
    /// Pick a feature-balanced subset of clips.
    Sample(SampleArgs),
    /// Apply a first-stage corruption plus block-DCT compression.
    Distort(DistortArgs),
    /// Full-reference scores (and optional map images) of a frame pair or clip pair.
    FrMaps(FrMapsArgs),
    /// Train the quality-map generator on synthetically distorted images.
    TrainGenerator(TrainGeneratorArgs),
    /// Train the pooling net on every clip of a manifest.
    TrainPooling(TrainPoolingArgs),
    /// Score one transcoded clip against its source.
    Predict(PredictArgs),
    /// Subject screening plus MOS/DMOS from a long-format score CSV.
    Screen(ScreenArgs),
    /// Logistic mapping of predictions to MOS, with SROCC/PLCC/RMSE.
    Fit(FitArgs),
    /// Repeated split/train/test protocol over a manifest.
    Eval(EvalArgs),
    /// Re-emit and summarize a saved report.
    Report(ReportArgs),
}

#[derive(Args)]
struct FeaturesArgs {
    /// Y4M clips.
    #[arg(required = true)]
    clips: Vec<PathBuf>,
    /// Frames sampled for the blur feature.
    #[arg(long)]
    samples: Option<usize>,
    /// Also write `id,si,ti,cpbd` rows here, the input format of `sample`.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    /// CSV with `id` and numeric feature columns; an optional `category`
    /// column enables per-category selection.
    #[arg(long)]
    features: PathBuf,
    /// Subset size (ignored with --category-sizes).
    #[arg(long, visible_alias = "size")]
    n: Option<usize>,
    /// Histogram bins per feature.
    #[arg(long)]
    bins: Option<usize>,
    /// Enumerate all subsets instead of local search.
    #[arg(long)]
    exact: bool,
    /// Greedy construction only.
    #[arg(long, conflicts_with = "exact")]
    greedy: bool,
    #[arg(long)]
    restarts: Option<usize>,
    /// Per-category sizes, e.g. `game=12,vlog=13`.
    #[arg(long)]
    category_sizes: Option<String>,
}

#[derive(Args)]
struct DistortArgs {
    /// Directory of pristine PGM images; procedural textures when absent.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Distorted images to emit, cycling over the inputs.
    #[arg(long)]
    count: Option<usize>,
    /// Fix the first stage to Gaussian noise of this sigma (8-bit scale).
    #[arg(long, conflicts_with = "blur")]
    noise: Option<f64>,
    /// Fix the first stage to Gaussian blur of this sigma.
    #[arg(long)]
    blur: Option<f64>,
    /// Fix the block-DCT quality (1-100).
    #[arg(long)]
    quality: Option<u32>,
}

#[derive(Args)]
struct FrMapsArgs {
    /// Reference PGM image or Y4M clip.
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long = "dist")]
    distorted: PathBuf,
    /// ssim, vif, mdsi or motion.
    #[arg(long, default_value = "vif")]
    metric: String,
    /// Per-frame map archives and summary.json go here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write each map as a PGM image.
    #[arg(long)]
    pgm: bool,
}

#[derive(Args)]
struct TrainGeneratorArgs {
    /// Directory of pristine PGM images.
    #[arg(long, conflicts_with = "synthetic")]
    images: Option<PathBuf>,
    /// Use this many procedural textures instead of images.
    #[arg(long)]
    synthetic: Option<usize>,
    #[arg(long)]
    patch: Option<usize>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Weights archive.
    #[arg(long)]
    out: PathBuf,
    /// Loss curve CSV (default: next to the weights).
    #[arg(long)]
    curve: Option<PathBuf>,
}

#[derive(Args)]
struct TrainPoolingArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Generator weights.
    #[arg(long)]
    generator: PathBuf,
    /// Hidden width of the pooling net.
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Weights archive.
    #[arg(long)]
    out: PathBuf,
    /// Loss curve CSV (default: next to the weights).
    #[arg(long)]
    curve: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    transcoded: PathBuf,
    #[arg(long)]
    generator: PathBuf,
    #[arg(long)]
    pooling: PathBuf,
}

#[derive(Args)]
struct ScreenArgs {
    /// Columns subject_id, presentation_id, score[, source_id, is_hidden_reference].
    #[arg(long)]
    scores: PathBuf,
    /// Write presentation_id,mos[,dmos] for retained subjects.
    #[arg(long)]
    mos_out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// CSV with `prediction` and `mos` columns.
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    generator: PathBuf,
    #[arg(long)]
    repeats: Option<usize>,
    /// Comma-separated: full, no_source_maps, no_transcode_maps.
    #[arg(long)]
    ablations: Option<String>,
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated: json, csv, plotdata.
    #[arg(long, default_value = "json,csv,plotdata")]
    formats: String,
}

#[derive(Args)]
struct ReportArgs {
    /// A report.json written by `eval`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv,plotdata")]
    formats: String,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let mut settings = match &cli.config {
        Some(p) => Settings::load(p)?,
        None => Settings::default(),
    };
    if let Some(s) = cli.seed {
        settings.set("seed", s);
    }
    if let Some(t) = cli.threads {
        settings.set("threads", t);
    }
    let seed: u64 = settings.get_or("seed", 0)?;
    match cli.command {
        Command::Features(a) => features(a, &settings),
        Command::Sample(a) => sample(a, &settings, seed),
        Command::Distort(a) => distort(a, &settings, seed),
        Command::FrMaps(a) => fr_maps(a),
        Command::TrainGenerator(a) => train_gen(a, &settings, seed),
        Command::TrainPooling(a) => train_pool(a, &settings, seed),
        Command::Predict(a) => predict(a, &settings),
        Command::Screen(a) => screen(a),
        Command::Fit(a) => fit(a),
        Command::Eval(a) => eval(a, settings),
        Command::Report(a) => report(a),
    }
}

fn is_pgm(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}

/// Frames of a PGM image (one frame) or a Y4M clip, as floats.
fn read_frames(path: &Path) -> Result<Vec<Plane<f32>>> {
    if is_pgm(path) {
        let bytes = std::fs::read(path).with_context(|| path.display().to_string())?;
        return Ok(vec![read_pgm(&bytes)?.to_float()]);
    }
    Ok(read_clip(path)?
        .luma()
        .iter()
        .map(Plane::to_float)
        .collect())
}

fn load_net(path: &Path) -> Result<Network<f32>> {
    let bytes = std::fs::read(path).with_context(|| path.display().to_string())?;
    Ok(Network::from_archive(&TensorArchive::from_bytes(&bytes)?)?)
}

fn save_net(net: &mut Network<f32>, path: &Path) -> Result<()> {
    std::fs::write(path, net.to_archive().to_bytes()).with_context(|| path.display().to_string())
}

fn print_json(v: &impl Serialize) -> Result<()> {
    use std::io::Write;
    let text = serde_json::to_string_pretty(v)?;
    match writeln!(std::io::stdout(), "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

#[derive(Serialize)]
struct FeatureFlags {
    /// Sampled frames without edges; their CPBD counts as 1.
    degenerate_blur_frames: usize,
}

#[derive(Serialize)]
struct FeatureRow {
    id: String,
    si: f64,
    ti: f64,
    cpbd: f64,
    flags: FeatureFlags,
}

fn features(a: FeaturesArgs, settings: &Settings) -> Result<()> {
    let configured = settings.get::<usize>("blur_samples")?;
    let mut rows = Vec::new();
    for path in &a.clips {
        let clip = read_clip(path)?;
        // an explicit count is honoured or rejected; the default shrinks to short clips
        let samples = a
            .samples
            .or(configured)
            .unwrap_or(DEFAULT_BLUR_SAMPLES.min(clip.frame_count()));
        let f = feature_triple(&clip, samples, &CpbdConfig::default())
            .with_context(|| path.display().to_string())?;
        let id = path.file_stem().map_or_else(
            || path.display().to_string(),
            |s| s.to_string_lossy().into_owned(),
        );
        rows.push(FeatureRow {
            id,
            si: f.si,
            ti: f.ti,
            cpbd: f.blur,
            flags: FeatureFlags {
                degenerate_blur_frames: f.degenerate_blur_frames,
            },
        });
    }
    if let Some(path) = &a.csv {
        let mut w = csv::Writer::from_path(path).with_context(|| path.display().to_string())?;
        w.write_record(["id", "si", "ti", "cpbd"])?;
        for r in &rows {
            w.write_record([
                r.id.clone(),
                r.si.to_string(),
                r.ti.to_string(),
                r.cpbd.to_string(),
            ])?;
        }
        w.flush()?;
    }
    match rows.len() {
        1 => print_json(&rows[0]),
        _ => print_json(&rows),
    }
}

#[derive(Serialize)]
struct Selection {
    category: Option<String>,
    ids: Vec<String>,
    objective: f64,
}

fn sample(a: SampleArgs, settings: &Settings, seed: u64) -> Result<()> {
    let bins = a.bins.unwrap_or(settings.get_or("sampler.bins", 5)?);
    let restarts = a
        .restarts
        .unwrap_or(settings.get_or("sampler.restarts", 10)?);
    let mut r =
        csv::Reader::from_path(&a.features).with_context(|| a.features.display().to_string())?;
    let headers = r.headers()?.clone();
    let id_col = headers
        .iter()
        .position(|h| h == "id")
        .context("features CSV needs an `id` column")?;
    let cat_col = headers.iter().position(|h| h == "category");
    let named: Vec<usize> = ["si", "ti", "cpbd"]
        .iter()
        .filter_map(|n| headers.iter().position(|h| h == *n))
        .collect();
    // without the standard columns, every column except id/category is a feature
    let feat_cols: Vec<usize> = if named.is_empty() {
        (0..headers.len())
            .filter(|&i| !["id", "category"].contains(&&headers[i]))
            .collect()
    } else {
        named
    };
    let mut rows: Vec<(String, Option<String>, Vec<f64>)> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let feats = feat_cols
            .iter()
            .map(|&i| {
                rec[i]
                    .trim()
                    .parse::<f64>()
                    .with_context(|| format!("column {}", &headers[i]))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push((
            rec[id_col].to_string(),
            cat_col.map(|c| rec[c].to_string()),
            feats,
        ));
    }
    let mut out = Vec::new();
    if let Some(spec) = &a.category_sizes {
        let mut problems = Vec::new();
        let mut members = Vec::new();
        for part in spec.split(',') {
            let (cat, n) = part
                .split_once('=')
                .context("category sizes look like name=count")?;
            let n: usize = n.trim().parse()?;
            let idx: Vec<usize> = (0..rows.len())
                .filter(|&i| rows[i].1.as_deref() == Some(cat.trim()))
                .collect();
            let feats = idx.iter().map(|&i| rows[i].2.clone()).collect();
            problems.push((
                cat.trim().to_string(),
                SubsetProblem::uniform(feats, bins, n)?,
            ));
            members.push(idx);
        }
        for ((cat, sel), idx) in solve_by_category(&problems, seed, restarts)
            .into_iter()
            .zip(members)
        {
            let ids = sel
                .selected
                .iter()
                .map(|&i| rows[idx[i]].0.clone())
                .collect();
            out.push(Selection {
                category: Some(cat),
                ids,
                objective: sel.objective,
            });
        }
    } else {
        let size =
            a.n.or(settings.get("sampler.size")?)
                .context("--n is required")?;
        let problem =
            SubsetProblem::uniform(rows.iter().map(|r| r.2.clone()).collect(), bins, size)?;
        let sel = if a.exact {
            solve_exact(&problem, DEFAULT_EXACT_BUDGET)?
        } else if a.greedy {
            solve_greedy(&problem)
        } else {
            solve_local_search(&problem, seed, restarts)
        };
        let ids = sel.selected.iter().map(|&i| rows[i].0.clone()).collect();
        out.push(Selection {
            category: None,
            ids,
            objective: sel.objective,
        });
    }
    print_json(&out)
}

fn pgm_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| dir.display().to_string())?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| is_pgm(p));
    paths.sort();
    Ok(paths)
}

fn map_archive(name: &str, m: &uvqa::quality::QualityMap) -> Result<TensorArchive> {
    let mut a = TensorArchive::new();
    a.insert(name, vec![m.height, m.width], m.values.clone())?;
    Ok(a)
}

#[derive(Serialize)]
struct DistortRecord {
    index: usize,
    input: String,
    reference: String,
    distorted: String,
    label: String,
    provenance: uvqa::distort::Provenance,
}

fn distort(a: DistortArgs, settings: &Settings, seed: u64) -> Result<()> {
    let (names, sources): (Vec<String>, Vec<Plane<f32>>) = match &a.input {
        Some(dir) => {
            let mut names = Vec::new();
            let mut planes = Vec::new();
            for p in pgm_files(dir)? {
                names.push(p.display().to_string());
                planes.extend(read_frames(&p)?);
            }
            (names, planes)
        }
        None => {
            let size = settings.get_or("distort.size", 128)?;
            let n = a.count.unwrap_or(10);
            let names = (0..n)
                .map(|i| format!("texture:{}", seed.wrapping_add(i as u64)))
                .collect();
            (
                names,
                (0..n)
                    .map(|i| value_noise_texture(size, size, seed.wrapping_add(i as u64), 4))
                    .collect(),
            )
        }
    };
    if sources.is_empty() {
        bail!("no input images");
    }
    let count = a.count.unwrap_or(sources.len());
    std::fs::create_dir_all(&a.out).with_context(|| a.out.display().to_string())?;
    let mut rng_seed = uvqa::distort::rng_from_seed(seed);
    let mut records = Vec::with_capacity(count);
    for i in 0..count {
        let src = &sources[i % sources.len()];
        let mut recipe = DistortionRecipe::random(rand::Rng::random(&mut rng_seed));
        match (a.noise, a.blur) {
            (Some(sigma), _) => recipe.first_stage = FirstStage::Noise { sigma },
            (_, Some(sigma)) => recipe.first_stage = FirstStage::Blur { sigma },
            _ => {}
        }
        if let Some(q) = a.quality {
            recipe.quality = q;
        }
        let (d, provenance) = synthesize(src, &recipe)?;
        let label = vif_map(src, &d, &VifParams::default())?;
        let (r_name, d_name, l_name) = (
            format!("{i:05}_ref.pgm"),
            format!("{i:05}_dist.pgm"),
            format!("{i:05}_label.uvqa"),
        );
        std::fs::write(a.out.join(&r_name), write_pgm(&src.to_u8()))?;
        std::fs::write(a.out.join(&d_name), write_pgm(&d.to_u8()))?;
        std::fs::write(a.out.join(&l_name), map_archive("vif", &label)?.to_bytes())?;
        records.push(DistortRecord {
            index: i,
            input: names[i % names.len()].clone(),
            reference: r_name,
            distorted: d_name,
            label: l_name,
            provenance,
        });
    }
    std::fs::write(
        a.out.join("provenance.json"),
        serde_json::to_vec_pretty(&records)?,
    )?;
    eprintln!("wrote {count} pairs to {}", a.out.display());
    Ok(())
}

#[derive(Serialize)]
struct FrameScores {
    frame: usize,
    psnr: f64,
    ssim: f64,
    vif: f64,
    mdsi: f64,
    /// Mean of the requested map.
    map_mean: f64,
}

#[derive(Serialize)]
struct MapSummary {
    metric: String,
    frames: Vec<FrameScores>,
    map_mean: f64,
    psnr: f64,
}

fn fr_maps(a: FrMapsArgs) -> Result<()> {
    let (r, d) = (read_frames(&a.reference)?, read_frames(&a.distorted)?);
    if r.len() != d.len() {
        bail!("reference has {} frames, distorted {}", r.len(), d.len());
    }
    if !["ssim", "vif", "mdsi", "motion"].contains(&a.metric.as_str()) {
        bail!("unknown metric {:?}", a.metric);
    }
    if let Some(dir) = &a.out {
        std::fs::create_dir_all(dir).with_context(|| dir.display().to_string())?;
    }
    let mut frames = Vec::new();
    for (i, (rf, df)) in r.iter().zip(&d).enumerate() {
        let ssim = ssim_map(rf, df, &SsimParams::default(), true)?;
        let vif = vif_map(rf, df, &VifParams::default())?;
        let mdsi = mdsi_map(rf, df, None, None, &MdsiParams::default())?;
        let map = match a.metric.as_str() {
            "ssim" => ssim.map.clone(),
            "vif" => vif.clone(),
            "mdsi" => mdsi.clone(),
            _ => motion_map(df, i.checked_sub(1).map(|p| &d[p]))?,
        };
        if let Some(dir) = &a.out {
            let stem = format!("{}_{i:05}", a.metric);
            std::fs::write(
                dir.join(format!("{stem}.uvqa")),
                map_archive(&a.metric, &map)?.to_bytes(),
            )?;
            if a.pgm {
                std::fs::write(
                    dir.join(format!("{stem}.pgm")),
                    write_pgm(&map.to_plane().to_u8()),
                )?;
            }
        }
        frames.push(FrameScores {
            frame: i,
            psnr: psnr(rf, df, DEFAULT_PSNR_CEILING)?,
            ssim: ssim.mean,
            vif: vif.mean(),
            mdsi: mdsi.mean(),
            map_mean: map.mean(),
        });
    }
    let n = frames.len() as f64;
    let summary = MapSummary {
        metric: a.metric.clone(),
        map_mean: frames.iter().map(|f| f.map_mean).sum::<f64>() / n,
        psnr: frames.iter().map(|f| f.psnr).sum::<f64>() / n,
        frames,
    };
    if let Some(dir) = &a.out {
        std::fs::write(
            dir.join("summary.json"),
            serde_json::to_vec_pretty(&summary)?,
        )?;
    }
    print_json(&summary)
}

fn write_curve(report: &uvqa::nn::TrainReport, weights: &Path, curve: Option<&Path>) -> Result<()> {
    let path = curve.map_or_else(|| weights.with_extension("loss.csv"), Path::to_path_buf);
    let mut w = csv::Writer::from_path(&path).with_context(|| path.display().to_string())?;
    w.write_record(["epoch", "loss"])?;
    w.write_record(["0".to_string(), report.initial_loss.to_string()])?;
    for (e, l) in report.epoch_losses.iter().enumerate() {
        w.write_record([(e + 1).to_string(), l.to_string()])?;
    }
    w.flush()?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn train_gen(a: TrainGeneratorArgs, settings: &Settings, seed: u64) -> Result<()> {
    let sources: Vec<Plane<f32>> = match (&a.images, a.synthetic) {
        (Some(dir), _) => {
            let mut v = Vec::new();
            for p in &pgm_files(dir)? {
                v.extend(read_frames(p)?);
            }
            v
        }
        (None, Some(n)) => (0..n)
            .map(|i| value_noise_texture(72, 72, seed.wrapping_add(i as u64), 4))
            .collect(),
        (None, None) => bail!("give --images or --synthetic"),
    };
    if sources.is_empty() {
        bail!("no training images");
    }
    let patch = a.patch.unwrap_or(settings.get_or("generator.patch", 64)?);
    let mut pairs = Vec::new();
    for item in build_corpus(&sources, seed)? {
        pairs.extend(extract_patches(&item.distorted, &item.label, patch)?);
    }
    if pairs.is_empty() {
        bail!("images are smaller than the {patch}px patch plus the label border");
    }
    let depth = a
        .depth
        .unwrap_or(settings.get_or("generator.depth", DESK_GENERATOR.0)?);
    let width = a
        .width
        .unwrap_or(settings.get_or("generator.width", DESK_GENERATOR.1)?);
    let mut config = settings.train_config(
        "generator",
        TrainConfig {
            seed,
            ..TrainConfig::generator()
        },
    )?;
    if let Some(e) = a.epochs {
        config.epochs = e;
    }
    let mut net = Network::new(build_generator(depth, width)?, seed)?;
    eprintln!(
        "{} patches, {} parameters",
        pairs.len(),
        net.parameter_count()
    );
    let report = train_generator(&mut net, &pairs as &[PatchPair], &config)?;
    save_net(&mut net, &a.out)?;
    write_curve(&report, &a.out, a.curve.as_deref())?;
    print_json(&report)
}

fn train_pool(a: TrainPoolingArgs, settings: &Settings, seed: u64) -> Result<()> {
    let corpus = load_corpus(&load_manifest(&a.manifest)?)?;
    let mut generator = load_net(&a.generator)?;
    let pipeline = settings.pipeline_config(PipelineConfig::default())?;
    let mut samples = Vec::new();
    for c in &corpus {
        for (t, &m) in c.transcoded.iter().zip(&c.mos) {
            samples.extend(clip_samples(&mut generator, &pipeline, &c.source, t, m)?);
        }
    }
    let width = a.width.unwrap_or(settings.get_or("pooling_width", 16)?);
    let mut config = settings.train_config(
        "pooling",
        TrainConfig {
            seed,
            ..TrainConfig::pooling()
        },
    )?;
    if let Some(e) = a.epochs {
        config.epochs = e;
    }
    let spec = build_pooling_net(
        pipeline.source_channels(),
        pipeline.transcoded_channels(),
        width,
    )?;
    let mut net = Network::new(spec, seed)?;
    let report = train_pooling(&mut net, &samples, &config)?;
    save_net(&mut net, &a.out)?;
    write_curve(&report, &a.out, a.curve.as_deref())?;
    print_json(&report)
}

fn predict(a: PredictArgs, settings: &Settings) -> Result<()> {
    let (source, transcoded) = (read_clip(&a.source)?, read_clip(&a.transcoded)?);
    let (mut generator, mut pooling) = (load_net(&a.generator)?, load_net(&a.pooling)?);
    let pipeline = settings.pipeline_config(PipelineConfig::default())?;
    let score = predict_score(
        &source,
        &transcoded,
        &mut generator,
        &mut pooling,
        &pipeline,
    )?;
    println!("{score}");
    Ok(())
}

fn screen(a: ScreenArgs) -> Result<()> {
    let file = std::fs::File::open(&a.scores).with_context(|| a.scores.display().to_string())?;
    let matrix = ScoreMatrix::from_csv(file)?;
    let report = screen_subjects(&matrix)?;
    if let Some(path) = &a.mos_out {
        let m = mos(&matrix, &report.retained)?;
        let d = matrix
            .presentations
            .iter()
            .any(|p| p.hidden_reference)
            .then(|| dmos(&matrix, &report.retained))
            .transpose()?;
        let mut w = csv::Writer::from_path(path)?;
        if d.is_some() {
            w.write_record(["presentation_id", "mos", "dmos"])?;
        } else {
            w.write_record(["presentation_id", "mos"])?;
        }
        for (i, p) in matrix.presentations.iter().enumerate() {
            let mut rec = vec![p.id.clone(), m[i].to_string()];
            if let Some(d) = &d {
                rec.push(d[i].to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
    }
    print_json(&report)
}

#[derive(Deserialize)]
struct FitRow {
    prediction: f64,
    mos: f64,
}

fn fit(a: FitArgs) -> Result<()> {
    let mut r = csv::Reader::from_path(&a.data).with_context(|| a.data.display().to_string())?;
    let rows: Vec<FitRow> = r.deserialize().collect::<Result<_, _>>()?;
    let x: Vec<f64> = rows.iter().map(|r| r.prediction).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.mos).collect();
    print_json(&evaluate(&x, &y)?)
}

fn parse_formats(s: &str) -> Result<Vec<uvqa::harness::ReportFormat>> {
    s.split(',')
        .map(|f| f.trim().parse().map_err(anyhow::Error::msg))
        .collect()
}

fn print_summary(report: &RunReport) {
    println!(
        "{:<20} {:>5} {:>16} {:>16} {:>16}",
        "method", "runs", "SROCC", "PLCC", "RMSE"
    );
    for a in &report.aggregates {
        println!(
            "{:<20} {:>5} {:>7.4} ± {:<6.4} {:>7.4} ± {:<6.4} {:>7.4} ± {:<6.4}",
            a.ablation.name(),
            a.runs,
            a.srocc_mean,
            a.srocc_std,
            a.plcc_mean,
            a.plcc_std,
            a.rmse_mean,
            a.rmse_std
        );
    }
}

fn eval(a: EvalArgs, mut settings: Settings) -> Result<()> {
    if let Some(r) = a.repeats {
        settings.set("repeats", r);
    }
    if let Some(ab) = &a.ablations {
        settings.set("ablations", ab);
    }
    let config = settings.experiment_config()?;
    let formats = parse_formats(&a.formats)?;
    let corpus = load_corpus(&load_manifest(&a.manifest)?)?;
    let mut generator = load_net(&a.generator)?;
    let report = run_experiment(&corpus, &mut generator, &config)?;
    for p in emit_report(&report, &a.out, &formats)? {
        eprintln!("wrote {}", p.display());
    }
    print_summary(&report);
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let report = load_report(&a.input)?;
    if let Some(dir) = &a.out {
        for p in emit_report(&report, dir, &parse_formats(&a.formats)?)? {
            eprintln!("wrote {}", p.display());
        }
    }
    print_summary(&report);
    Ok(())
}
