//! Clip-level scoring: generator maps for the source, full-reference maps
//! between source and transcode, the pooling net per frame, mean over frames.

use crate::media::{sample_frames_uniform, MediaError, Plane, VideoClip};
use crate::nn::{generate_map, pooling_forward, Network, NnError, PoolingSample, Tensor};
use crate::quality::{
    align_stack, map_stack, motion_map, MetricError, MetricKind, QualityMap, StackKind,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Media(#[from] MediaError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("source is {0}x{1}x{2} frames but transcode is {3}x{4}x{5}")]
    Geometry(usize, usize, usize, usize, usize, usize),
    #[error("{0}")]
    Config(String),
}

/// Which map group, if any, is swapped for raw frames.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    #[default]
    Full,
    /// Source maps replaced by source frames.
    NoSourceMaps,
    /// Transcoded maps replaced by transcoded frames.
    NoTranscodeMaps,
}

impl Ablation {
    pub const ALL: [Ablation; 3] = [
        Ablation::Full,
        Ablation::NoSourceMaps,
        Ablation::NoTranscodeMaps,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::NoSourceMaps => "no_source_maps",
            Ablation::NoTranscodeMaps => "no_transcode_maps",
        }
    }
}

impl std::str::FromStr for Ablation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown ablation {s:?}"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub stack: StackKind,
    /// Frames sampled uniformly per clip.
    pub frame_count: usize,
    pub ablation: Ablation,
    /// Map shrink factor before pooling, a power of two applied as repeated
    /// 2x2 means. 1 keeps full resolution.
    pub downsample: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            stack: StackKind::Vif,
            frame_count: 10,
            ablation: Ablation::Full,
            downsample: 4,
        }
    }
}

impl PipelineConfig {
    pub fn source_channels(&self) -> usize {
        match (self.ablation, self.stack) {
            (Ablation::NoSourceMaps, _) => 1,
            (_, StackKind::VmafStyle) => 2,
            _ => 1,
        }
    }

    pub fn transcoded_channels(&self) -> usize {
        match self.ablation {
            Ablation::NoTranscodeMaps => 1,
            _ => self.stack.channels(),
        }
    }
}

fn raw(frame: &Plane<f32>) -> QualityMap {
    QualityMap {
        width: frame.width(),
        height: frame.height(),
        values: frame.data().to_vec(),
        metric: MetricKind::Ssim,
        normalized: true,
        border: 0,
    }
}

fn generated(
    generator: &mut Network<f32>,
    frame: &Plane<f32>,
) -> Result<QualityMap, PipelineError> {
    let m = generate_map(generator, frame)?;
    Ok(QualityMap {
        metric: MetricKind::Vif,
        ..raw(&m)
    })
}

fn to_tensor(maps: &[QualityMap], downsample: usize) -> Result<Tensor<f32>, PipelineError> {
    if !downsample.is_power_of_two() {
        return Err(PipelineError::Config(format!(
            "downsample factor must be a power of two, got {downsample}"
        )));
    }
    let planes: Vec<Plane<f32>> = maps
        .iter()
        .map(|m| {
            let mut p = m.to_plane();
            let mut f = downsample;
            while f > 1 {
                p = p.downsample2();
                f /= 2;
            }
            p
        })
        .collect();
    let (w, h) = (planes[0].width(), planes[0].height());
    let data = planes
        .iter()
        .flat_map(|p| p.data().iter().copied())
        .collect();
    Ok(Tensor::new(vec![planes.len(), h, w], data)?)
}

/// Pooling-net input for one frame pair. `previous_*` are the preceding
/// frames, used by the motion channels.
pub fn frame_sample(
    generator: &mut Network<f32>,
    config: &PipelineConfig,
    source: &Plane<f32>,
    transcoded: &Plane<f32>,
    previous_source: Option<&Plane<f32>>,
    previous_transcoded: Option<&Plane<f32>>,
    label: f64,
) -> Result<PoolingSample, PipelineError> {
    let mut src = match config.ablation {
        Ablation::NoSourceMaps => vec![raw(source)],
        _ => vec![generated(generator, source)?],
    };
    if config.ablation != Ablation::NoSourceMaps && config.stack == StackKind::VmafStyle {
        src.push(motion_map(source, previous_source)?);
    }
    let trans = match config.ablation {
        Ablation::NoTranscodeMaps => vec![raw(transcoded)],
        _ => map_stack(config.stack, source, transcoded, previous_transcoded)?,
    };
    let n_src = src.len();
    src.extend(trans);
    let aligned = align_stack(&src);
    Ok(PoolingSample {
        source: to_tensor(&aligned[..n_src], config.downsample)?,
        transcoded: to_tensor(&aligned[n_src..], config.downsample)?,
        label,
    })
}

fn check_geometry(source: &VideoClip, transcoded: &VideoClip) -> Result<(), PipelineError> {
    let a = (source.width(), source.height(), source.frame_count());
    let b = (
        transcoded.width(),
        transcoded.height(),
        transcoded.frame_count(),
    );
    if a != b {
        return Err(PipelineError::Geometry(a.0, a.1, a.2, b.0, b.1, b.2));
    }
    Ok(())
}

/// One sample per uniformly chosen frame; `label` is the clip score.
pub fn clip_samples(
    generator: &mut Network<f32>,
    config: &PipelineConfig,
    source: &VideoClip,
    transcoded: &VideoClip,
    label: f64,
) -> Result<Vec<PoolingSample>, PipelineError> {
    check_geometry(source, transcoded)?;
    let frames = sample_frames_uniform(source.frame_count(), config.frame_count)?;
    let (sl, tl) = (source.luma(), transcoded.luma());
    frames
        .into_iter()
        .map(|i| {
            let prev = i.checked_sub(1);
            frame_sample(
                generator,
                config,
                &sl[i].to_float(),
                &tl[i].to_float(),
                prev.map(|p| sl[p].to_float()).as_ref(),
                prev.map(|p| tl[p].to_float()).as_ref(),
                label,
            )
        })
        .collect()
}

/// Mean of per-frame pooling-net scores.
pub fn score_samples(
    pooling: &mut Network<f32>,
    samples: &[PoolingSample],
) -> Result<f64, PipelineError> {
    if samples.is_empty() {
        return Err(PipelineError::Config("no frames to score".into()));
    }
    let mut total = 0.0;
    for s in samples {
        total += pooling_forward(pooling, s)?;
    }
    Ok(total / samples.len() as f64)
}

/// Predicted quality of `transcoded` given its (possibly degraded) source.
pub fn predict_score(
    source: &VideoClip,
    transcoded: &VideoClip,
    generator: &mut Network<f32>,
    pooling: &mut Network<f32>,
    config: &PipelineConfig,
) -> Result<f64, PipelineError> {
    let samples = clip_samples(generator, config, source, transcoded, 0.0)?;
    score_samples(pooling, &samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distort::{block_dct_compress, value_noise_texture};
    use crate::media::FrameRate;
    use crate::nn::{build_generator, build_pooling_net, Layer};

    fn clip(frames: Vec<Plane<f32>>) -> VideoClip {
        VideoClip::from_float_frames("clip", FrameRate::new(30, 1), &frames).unwrap()
    }

    fn moving(seed: u64, n: usize) -> Vec<Plane<f32>> {
        let base = value_noise_texture(40, 36, seed, 3);
        (0..n)
            .map(|t| Plane::from_fn(32, 32, |x, y| base.get(x + t, y + t / 2)))
            .collect()
    }

    fn nets(config: &PipelineConfig) -> (Network<f32>, Network<f32>) {
        let g = Network::new(build_generator(1, 4).unwrap(), 1).unwrap();
        let p = Network::new(
            build_pooling_net(config.source_channels(), config.transcoded_channels(), 4).unwrap(),
            2,
        )
        .unwrap();
        (g, p)
    }

    #[test]
    fn zeroed_final_layer_gives_bias() {
        let config = PipelineConfig {
            frame_count: 3,
            ..PipelineConfig::default()
        };
        let (mut g, mut p) = nets(&config);
        if let Some(Layer::Linear(fc)) = p.layers.last_mut() {
            fc.weight.data_mut().fill(0.0);
            fc.bias.data_mut()[0] = 3.25;
        } else {
            panic!("pooling net should end in a linear layer");
        }
        let s = clip(moving(1, 6));
        let t = clip(
            moving(1, 6)
                .iter()
                .map(|f| block_dct_compress(f, 20).unwrap())
                .collect(),
        );
        assert_eq!(
            predict_score(&s, &t, &mut g, &mut p, &config).unwrap(),
            3.25
        );
    }

    #[test]
    fn identical_static_clip_vmaf_stack() {
        let config = PipelineConfig {
            stack: StackKind::VmafStyle,
            frame_count: 4,
            downsample: 1,
            ..PipelineConfig::default()
        };
        let (mut g, mut p) = nets(&config);
        let f = value_noise_texture(32, 32, 3, 3);
        let s = clip(vec![f.clone(); 5]);
        let samples = clip_samples(&mut g, &config, &s, &s, 0.0).unwrap();
        for smp in &samples {
            let [c, h, w] = smp.transcoded.shape() else {
                panic!()
            };
            assert_eq!((*c, *h, *w), (2, 24, 24));
            let plane = h * w;
            assert!(smp.transcoded.data()[..plane].iter().all(|&v| v == 1.0));
            assert!(smp.transcoded.data()[plane..].iter().all(|&v| v == 0.0));
            assert_eq!(smp.source.shape(), &[2, 24, 24]);
        }
        let a = predict_score(&s, &s, &mut g, &mut p, &config).unwrap();
        let b = predict_score(&s, &s, &mut g, &mut p, &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn score_is_mean_of_frame_scores() {
        let config = PipelineConfig {
            frame_count: 4,
            downsample: 2,
            ..PipelineConfig::default()
        };
        let (mut g, mut p) = nets(&config);
        let src = moving(5, 8);
        let trans: Vec<Plane<f32>> = src
            .iter()
            .map(|f| block_dct_compress(f, 15).unwrap())
            .collect();
        let score = predict_score(
            &clip(src.clone()),
            &clip(trans.clone()),
            &mut g,
            &mut p,
            &config,
        )
        .unwrap();
        let idx = sample_frames_uniform(8, 4).unwrap();
        let mut per_frame = Vec::new();
        for &i in idx.iter().rev() {
            // frames go through the u8 clip container in predict_score
            let s = src[i].to_u8().to_float();
            let t = trans[i].to_u8().to_float();
            let ps = i.checked_sub(1).map(|j| src[j].to_u8().to_float());
            let pt = i.checked_sub(1).map(|j| trans[j].to_u8().to_float());
            let smp = frame_sample(&mut g, &config, &s, &t, ps.as_ref(), pt.as_ref(), 0.0).unwrap();
            assert_eq!(smp.source.shape(), &[1, 12, 12]);
            per_frame.push(pooling_forward(&mut p, &smp).unwrap());
        }
        let mean = per_frame.iter().sum::<f64>() / per_frame.len() as f64;
        assert!((score - mean).abs() < 1e-12, "{score} vs {mean}");
    }

    #[test]
    fn downsample_factor() {
        let src = value_noise_texture(40, 40, 2, 3);
        let trans = block_dct_compress(&src, 20).unwrap();
        for (factor, side) in [(1, 32), (2, 16), (4, 8), (8, 4)] {
            let config = PipelineConfig {
                downsample: factor,
                ..PipelineConfig::default()
            };
            let (mut g, _) = nets(&config);
            let s = frame_sample(&mut g, &config, &src, &trans, None, None, 1.0).unwrap();
            assert_eq!(s.transcoded.shape(), &[1, side, side]);
        }
        let config = PipelineConfig {
            downsample: 3,
            ..PipelineConfig::default()
        };
        let (mut g, _) = nets(&config);
        assert!(frame_sample(&mut g, &config, &src, &trans, None, None, 1.0).is_err());
    }

    #[test]
    fn ablations_swap_in_frames() {
        let src = value_noise_texture(32, 32, 7, 3);
        let trans = block_dct_compress(&src, 10).unwrap();
        for ablation in Ablation::ALL {
            let config = PipelineConfig {
                ablation,
                stack: StackKind::VmafStyle,
                downsample: 1,
                ..PipelineConfig::default()
            };
            let (mut g, _) = nets(&config);
            let s = frame_sample(&mut g, &config, &src, &trans, None, None, 1.0).unwrap();
            assert_eq!(s.source.shape()[0], config.source_channels());
            assert_eq!(s.transcoded.shape()[0], config.transcoded_channels());
            // only the VIF channel carries a border
            let crop = src.crop(4, 4, 24, 24).unwrap();
            match ablation {
                Ablation::NoSourceMaps => assert!(s.source.data() == crop.data()),
                Ablation::NoTranscodeMaps => assert!(s.transcoded.data() == trans.data()),
                Ablation::Full => assert!(s.source.data() != crop.data()),
            }
            assert_eq!(ablation.name().parse::<Ablation>().unwrap(), ablation);
        }
    }

    #[test]
    fn geometry_mismatch() {
        let config = PipelineConfig::default();
        let (mut g, mut p) = nets(&config);
        let a = clip(moving(1, 4));
        let b = clip(moving(1, 5));
        assert!(matches!(
            predict_score(&a, &b, &mut g, &mut p, &config),
            Err(PipelineError::Geometry(..))
        ));
    }
}
