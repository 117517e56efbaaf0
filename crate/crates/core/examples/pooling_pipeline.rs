//! The full predictor: generator maps for the source, full-reference maps
//! for the transcode, a pooling net trained on clip scores, and the source
//! split experiment with ablations.
//!
//!     cargo run --release --example pooling_pipeline

use uvqa::distort::{block_dct_compress, gaussian_blur, value_noise_texture};
use uvqa::harness::{run_experiment, CorpusSource, ExperimentConfig};
use uvqa::media::{FrameRate, Plane, VideoClip};
use uvqa::nn::{build_generator, build_pooling_net, train_pooling, Network, TrainConfig};
use uvqa::pipeline::{clip_samples, predict_score, Ablation, PipelineConfig};

fn main() -> anyhow::Result<()> {
    let fps = FrameRate::new(30, 1);
    let mut corpus = Vec::new();
    for s in 0..10u64 {
        let texture = value_noise_texture(56, 56, s, 4);
        let frames: Vec<Plane<f32>> = (0..4)
            .map(|t| {
                gaussian_blur(
                    &Plane::from_fn(48, 48, |x, y| texture.get(x + t, y)),
                    0.3 * s as f64,
                )
            })
            .collect::<Result<_, _>>()?;
        let mut transcoded = Vec::new();
        let mut mos = Vec::new();
        for q in [60u32, 20, 5] {
            let t: Vec<Plane<f32>> = frames
                .iter()
                .map(|f| block_dct_compress(f, q))
                .collect::<Result<_, _>>()?;
            transcoded.push(VideoClip::from_float_frames(format!("s{s}q{q}"), fps, &t)?);
            mos.push(1.0 + q as f64 / 15.0 - 0.2 * s as f64);
        }
        let source = VideoClip::from_float_frames(format!("s{s}"), fps, &frames)?;
        corpus.push(CorpusSource {
            name: format!("s{s}"),
            source,
            transcoded,
            mos,
        });
    }

    // an untrained generator keeps the example quick
    let mut generator = Network::new(build_generator(1, 4)?, 0)?;
    let pipeline = PipelineConfig {
        frame_count: 2,
        downsample: 2,
        ..PipelineConfig::default()
    };

    let mut samples = Vec::new();
    for c in &corpus {
        for (t, &m) in c.transcoded.iter().zip(&c.mos) {
            samples.extend(clip_samples(&mut generator, &pipeline, &c.source, t, m)?);
        }
    }
    let mut pooling = Network::new(
        build_pooling_net(
            pipeline.source_channels(),
            pipeline.transcoded_channels(),
            4,
        )?,
        0,
    )?;
    let report = train_pooling(
        &mut pooling,
        &samples,
        &TrainConfig {
            epochs: 40,
            learning_rate: 3e-3,
            ..TrainConfig::pooling()
        },
    )?;
    println!(
        "pooling loss {:.3} -> {:.3}",
        report.initial_loss,
        report.final_loss()
    );
    let score = predict_score(
        &corpus[0].source,
        &corpus[0].transcoded[0],
        &mut generator,
        &mut pooling,
        &pipeline,
    )?;
    println!(
        "predicted {score:.3} for s0q60, subjective {:.3}",
        corpus[0].mos[0]
    );

    let config = ExperimentConfig {
        repeats: 3,
        pipeline,
        ablations: Ablation::ALL.to_vec(),
        pooling_width: 4,
        train: TrainConfig {
            epochs: 20,
            learning_rate: 3e-3,
            ..TrainConfig::pooling()
        },
        ..ExperimentConfig::default()
    };
    let result = run_experiment(&corpus, &mut generator, &config)?;
    for a in &result.aggregates {
        println!(
            "{:<18} srocc {:.3} +- {:.3}",
            a.ablation.name(),
            a.srocc_mean,
            a.srocc_std
        );
    }
    Ok(())
}
