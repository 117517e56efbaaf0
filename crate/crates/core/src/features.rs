//! Content characterization: spatial information (SI), temporal information
//! (TI) and the CPBD sharpness index.
//!
//! SI and TI are measured on the 8-bit luma scale (0..255) and use population
//! standard deviations. CPBD also works on the 8-bit scale; its constants are
//! in [`CpbdConfig`].

use crate::filters::{correlate3x3, mean_std, SOBEL_X, SOBEL_Y};
use crate::media::{sample_frames_uniform, MediaError, Plane, VideoClip};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("plane {width}x{height} is smaller than the required {min}x{min}")]
    Undersized {
        width: usize,
        height: usize,
        min: usize,
    },
    #[error("temporal information needs at least 2 frames, clip has {0}")]
    TooFewFrames(usize),
    #[error(transparent)]
    Media(#[from] MediaError),
}

fn sobel_mag_raw(data: &[f64], w: usize, h: usize) -> Vec<f64> {
    let gx = correlate3x3(data, w, h, &SOBEL_X);
    let gy = correlate3x3(data, w, h, &SOBEL_Y);
    gx.iter()
        .zip(&gy)
        .map(|(a, b)| (a * a + b * b).sqrt())
        .collect()
}

fn luma_f64(p: &Plane<u8>) -> Vec<f64> {
    p.data().iter().map(|&v| v as f64).collect()
}

/// Gradient magnitude `sqrt(Gx^2 + Gy^2)` with 3x3 Sobel kernels and edge
/// replication. Output is on the same scale as the input.
pub fn sobel_magnitude(plane: &Plane<f32>) -> Result<Plane<f32>, FeatureError> {
    let (w, h) = (plane.width(), plane.height());
    if w < 3 || h < 3 {
        return Err(FeatureError::Undersized {
            width: w,
            height: h,
            min: 3,
        });
    }
    let data = plane.scaled_f64(1.0);
    let mag = sobel_mag_raw(&data, w, h);
    Ok(Plane::new(
        w,
        h,
        mag.into_iter().map(|v| v as f32).collect(),
    )?)
}

/// SI: maximum over frames of the spatial std of the Sobel magnitude.
pub fn spatial_information(clip: &VideoClip) -> Result<f64, FeatureError> {
    let (w, h) = (clip.width(), clip.height());
    if w < 3 || h < 3 {
        return Err(FeatureError::Undersized {
            width: w,
            height: h,
            min: 3,
        });
    }
    Ok(clip
        .luma()
        .iter()
        .map(|f| mean_std(&sobel_mag_raw(&luma_f64(f), w, h)).1)
        .fold(0.0, f64::max))
}

/// TI: maximum over `n >= 2` of the spatial std of `F_n - F_{n-1}`.
pub fn temporal_information(clip: &VideoClip) -> Result<f64, FeatureError> {
    if clip.frame_count() < 2 {
        return Err(FeatureError::TooFewFrames(clip.frame_count()));
    }
    Ok(clip
        .luma()
        .windows(2)
        .map(|pair| {
            let diff: Vec<f64> = pair[1]
                .data()
                .iter()
                .zip(pair[0].data())
                .map(|(&a, &b)| a as f64 - b as f64)
                .collect();
            mean_std(&diff).1
        })
        .fold(0.0, f64::max))
}

/// Constants of the CPBD index. Contrast is on the 8-bit scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CpbdConfig {
    pub block_size: usize,
    pub beta: f64,
    /// Blocks with contrast at or below this use the low-contrast JNB width.
    pub contrast_cut: f64,
    pub jnb_low_contrast: f64,
    pub jnb_high_contrast: f64,
    pub probability_cut: f64,
    /// A block is an edge block when its edge-pixel count exceeds this
    /// fraction of its area.
    pub edge_block_fraction: f64,
    /// Edge pixels need `Gx^2` above this multiple of the image mean of `Gx^2`.
    pub edge_threshold_scale: f64,
}

impl Default for CpbdConfig {
    fn default() -> Self {
        Self {
            block_size: 64,
            beta: 3.6,
            contrast_cut: 50.0,
            jnb_low_contrast: 5.0,
            jnb_high_contrast: 3.0,
            probability_cut: 0.63,
            edge_block_fraction: 0.002,
            edge_threshold_scale: 4.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CpbdResult {
    pub value: f64,
    pub edges: usize,
    /// No edge was found; `value` is 1.0 by convention.
    pub degenerate: bool,
}

/// Vertical edge pixels: thresholded horizontal Sobel energy, thinned to
/// local maxima along the row. Returns `(is_edge, gx)`.
fn detect_vertical_edges(img: &[f64], w: usize, h: usize, scale: f64) -> (Vec<bool>, Vec<f64>) {
    let gx = correlate3x3(img, w, h, &SOBEL_X);
    let energy: Vec<f64> = gx.iter().map(|g| g * g).collect();
    let cutoff = scale * energy.iter().sum::<f64>() / energy.len() as f64;
    let mut edges = vec![false; w * h];
    if cutoff <= 0.0 {
        return (edges, gx);
    }
    for y in 0..h {
        for x in 1..w.saturating_sub(1) {
            let i = y * w + x;
            let e = energy[i];
            edges[i] = e > cutoff && e > energy[i - 1] && e >= energy[i + 1];
        }
    }
    (edges, gx)
}

/// Horizontal edge width: distance between the local extrema on either side
/// of the edge pixel, walking along the intensity slope.
fn edge_width(row: &[f64], x: usize, rising: bool) -> usize {
    let (mut left, mut right) = (x, x);
    if rising {
        while left > 0 && row[left - 1] < row[left] {
            left -= 1;
        }
        while right + 1 < row.len() && row[right + 1] > row[right] {
            right += 1;
        }
    } else {
        while left > 0 && row[left - 1] > row[left] {
            left -= 1;
        }
        while right + 1 < row.len() && row[right + 1] < row[right] {
            right += 1;
        }
    }
    right - left
}

/// Cumulative probability of blur detection for a `[0, 1]` plane.
pub fn cpbd(plane: &Plane<f32>, config: &CpbdConfig) -> Result<CpbdResult, FeatureError> {
    let (w, h) = (plane.width(), plane.height());
    let b = config.block_size;
    if w < b || h < b {
        return Err(FeatureError::Undersized {
            width: w,
            height: h,
            min: b,
        });
    }
    let img = plane.scaled_f64(255.0);
    let (edges, gx) = detect_vertical_edges(&img, w, h, config.edge_threshold_scale);
    let edge_block_min = config.edge_block_fraction * (b * b) as f64;

    let mut total = 0usize;
    let mut sharp = 0usize;
    for by in 0..h / b {
        for bx in 0..w / b {
            let (x0, y0) = (bx * b, by * b);
            let mut count = 0usize;
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for y in y0..y0 + b {
                for x in x0..x0 + b {
                    count += edges[y * w + x] as usize;
                    lo = lo.min(img[y * w + x]);
                    hi = hi.max(img[y * w + x]);
                }
            }
            if (count as f64) <= edge_block_min {
                continue;
            }
            let jnb = if hi - lo <= config.contrast_cut {
                config.jnb_low_contrast
            } else {
                config.jnb_high_contrast
            };
            for y in y0..y0 + b {
                let row = &img[y * w..(y + 1) * w];
                for x in x0..x0 + b {
                    if !edges[y * w + x] {
                        continue;
                    }
                    let width = edge_width(row, x, gx[y * w + x] > 0.0);
                    if width == 0 {
                        continue;
                    }
                    let p_blur = 1.0 - (-(width as f64 / jnb).powf(config.beta)).exp();
                    total += 1;
                    sharp += (p_blur <= config.probability_cut) as usize;
                }
            }
        }
    }
    if total == 0 {
        return Ok(CpbdResult {
            value: 1.0,
            edges: 0,
            degenerate: true,
        });
    }
    Ok(CpbdResult {
        value: sharp as f64 / total as f64,
        edges: total,
        degenerate: false,
    })
}

/// SI, TI and mean CPBD of one clip.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureTriple {
    pub si: f64,
    pub ti: f64,
    pub blur: f64,
    /// Sampled frames where CPBD found no edges.
    pub degenerate_blur_frames: usize,
}

impl FeatureTriple {
    pub fn as_array(&self) -> [f64; 3] {
        [self.si, self.ti, self.blur]
    }
}

pub const DEFAULT_BLUR_SAMPLES: usize = 10;

/// SI and TI over the whole clip, blur as the mean CPBD of `sample_count`
/// uniformly sampled frames.
pub fn feature_triple(
    clip: &VideoClip,
    sample_count: usize,
    config: &CpbdConfig,
) -> Result<FeatureTriple, FeatureError> {
    let si = spatial_information(clip)?;
    let ti = temporal_information(clip)?;
    let idx = sample_frames_uniform(clip.frame_count(), sample_count)?;
    let mut sum = 0.0;
    let mut degenerate = 0;
    for &i in &idx {
        let r = cpbd(&clip.luma()[i].to_float(), config)?;
        sum += r.value;
        degenerate += r.degenerate as usize;
    }
    Ok(FeatureTriple {
        si,
        ti,
        blur: sum / idx.len() as f64,
        degenerate_blur_frames: degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distort::gaussian_blur;
    use crate::media::FrameRate;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive_sobel(p: &Plane<f32>) -> Vec<f64> {
        let (w, h) = (p.width() as isize, p.height() as isize);
        let mut out = Vec::new();
        for y in 0..h {
            for x in 0..w {
                let v = |dx: isize, dy: isize| p.get_clamped(x + dx, y + dy) as f64;
                let gx =
                    (v(1, -1) + 2.0 * v(1, 0) + v(1, 1)) - (v(-1, -1) + 2.0 * v(-1, 0) + v(-1, 1));
                let gy =
                    (v(-1, 1) + 2.0 * v(0, 1) + v(1, 1)) - (v(-1, -1) + 2.0 * v(0, -1) + v(1, -1));
                out.push((gx * gx + gy * gy).sqrt());
            }
        }
        out
    }

    fn naive_std(v: &[f64]) -> f64 {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt()
    }

    fn random_clip(rng: &mut ChaCha8Rng, w: usize, h: usize, n: usize) -> VideoClip {
        let frames = (0..n)
            .map(|_| Plane::from_fn(w, h, |_, _| rng.random::<u8>()))
            .collect();
        VideoClip::new("r", FrameRate::new(30, 1), frames, None).unwrap()
    }

    #[test]
    fn sobel_constant_and_step() {
        let c = Plane::filled(8, 8, 0.7f32);
        assert!(sobel_magnitude(&c)
            .unwrap()
            .data()
            .iter()
            .all(|&v| v == 0.0));
        let step = Plane::from_fn(10, 6, |x, _| if x >= 5 { 1.0f32 } else { 0.0 });
        let m = sobel_magnitude(&step).unwrap();
        for y in 0..6 {
            for x in 0..10 {
                if m.get(x, y) != 0.0 {
                    assert!(x == 4 || x == 5, "nonzero at column {x}");
                }
            }
        }
        assert!(sobel_magnitude(&Plane::filled(2, 8, 0.0f32)).is_err());
    }

    #[test]
    fn sobel_matches_naive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = Plane::from_fn(8, 8, |_, _| rng.random::<f32>());
        let m = sobel_magnitude(&p).unwrap();
        for (a, b) in m.data().iter().zip(naive_sobel(&p)) {
            assert!((*a as f64 - b).abs() < 1e-5);
        }
    }

    #[test]
    fn si_ti_constant_and_single_frame() {
        let clip = VideoClip::new(
            "c",
            FrameRate::new(30, 1),
            vec![Plane::filled(16, 16, 90u8); 3],
            None,
        )
        .unwrap();
        assert_eq!(spatial_information(&clip).unwrap(), 0.0);
        assert_eq!(temporal_information(&clip).unwrap(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let one = random_clip(&mut rng, 16, 16, 1);
        let expect = naive_std(&naive_sobel(&one.luma()[0].map(|v| v as f32)));
        assert!((spatial_information(&one).unwrap() - expect).abs() < 1e-9);
        assert!(matches!(
            temporal_information(&one),
            Err(FeatureError::TooFewFrames(1))
        ));
    }

    #[test]
    fn si_ti_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let clip = random_clip(&mut rng, 16, 16, 3);
        let si = clip
            .luma()
            .iter()
            .map(|f| naive_std(&naive_sobel(&f.map(|v| v as f32))))
            .fold(0.0, f64::max);
        let ti = (1..3)
            .map(|n| {
                let d: Vec<f64> = (0..256)
                    .map(|i| clip.luma()[n].data()[i] as f64 - clip.luma()[n - 1].data()[i] as f64)
                    .collect();
                naive_std(&d)
            })
            .fold(0.0, f64::max);
        assert!((spatial_information(&clip).unwrap() - si).abs() < 1e-9);
        assert!((temporal_information(&clip).unwrap() - ti).abs() < 1e-9);
    }

    #[test]
    fn ti_zero_for_constant_increment() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let base = Plane::from_fn(16, 16, |_, _| rng.random_range(0u8..200));
        let frames: Vec<_> = (0..4).map(|k| base.map(|v| v + 10 * k as u8)).collect();
        let clip = VideoClip::new("inc", FrameRate::new(30, 1), frames, None).unwrap();
        assert_eq!(temporal_information(&clip).unwrap(), 0.0);
    }

    #[test]
    fn si_ti_shift_and_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let frames: Vec<_> = (0..3)
            .map(|_| Plane::from_fn(16, 16, |_, _| rng.random_range(0u8..100)))
            .collect();
        let clip = VideoClip::new("a", FrameRate::new(30, 1), frames.clone(), None).unwrap();
        let shifted = VideoClip::new(
            "b",
            FrameRate::new(30, 1),
            frames.iter().map(|f| f.map(|v| v + 37)).collect(),
            None,
        )
        .unwrap();
        let scaled = VideoClip::new(
            "c",
            FrameRate::new(30, 1),
            frames.iter().map(|f| f.map(|v| v * 2)).collect(),
            None,
        )
        .unwrap();
        let (si, ti) = (
            spatial_information(&clip).unwrap(),
            temporal_information(&clip).unwrap(),
        );
        assert!((spatial_information(&shifted).unwrap() - si).abs() < 1e-9);
        assert!((temporal_information(&shifted).unwrap() - ti).abs() < 1e-9);
        assert!((spatial_information(&scaled).unwrap() - 2.0 * si).abs() < 1e-9);
        assert!((temporal_information(&scaled).unwrap() - 2.0 * ti).abs() < 1e-9);
    }

    fn step_rows(w: usize, h: usize) -> Plane<f32> {
        Plane::from_fn(w, h, |x, _| if x >= w / 2 { 1.0 } else { 0.0 })
    }

    #[test]
    fn cpbd_ideal_step_is_sharp() {
        let r = cpbd(&step_rows(64, 64), &CpbdConfig::default()).unwrap();
        assert_eq!(r.value, 1.0);
        assert_eq!(r.edges, 64);
        assert!(!r.degenerate);
    }

    #[test]
    fn cpbd_wide_blur_is_lower() {
        let sharp = cpbd(&step_rows(64, 64), &CpbdConfig::default()).unwrap();
        let blurred = gaussian_blur(&step_rows(64, 64), 8.0).unwrap();
        let r = cpbd(&blurred, &CpbdConfig::default()).unwrap();
        assert!(r.value < sharp.value);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn cpbd_non_increasing_under_blur(
            seed in any::<u64>(),
            lo in 0.05f32..0.4,
            hi in 0.6f32..0.95,
        ) {
            // random vertical edge pattern: a few steps per row band
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cuts: Vec<usize> = (0..4).map(|_| rng.random_range(4..60)).collect();
            let pattern = Plane::from_fn(64, 64, |x, _| {
                if cuts.iter().filter(|&&c| x >= c).count() % 2 == 1 { hi } else { lo }
            });
            let mut last = f64::INFINITY;
            for sigma in [0.0, 1.0, 2.0, 4.0, 8.0] {
                let p = gaussian_blur(&pattern, sigma).unwrap();
                let r = cpbd(&p, &CpbdConfig::default()).unwrap();
                // once blur hides every edge the result is the flagged 1.0
                if r.degenerate {
                    continue;
                }
                prop_assert!(r.value <= last + 1e-12, "sigma {} gave {} after {}", sigma, r.value, last);
                last = r.value;
            }
        }
    }

    #[test]
    fn cpbd_constant_plane_is_degenerate() {
        let r = cpbd(&Plane::filled(64, 64, 0.5f32), &CpbdConfig::default()).unwrap();
        assert_eq!(
            r,
            CpbdResult {
                value: 1.0,
                edges: 0,
                degenerate: true
            }
        );
        assert!(cpbd(&Plane::filled(63, 64, 0.5f32), &CpbdConfig::default()).is_err());
    }

    #[test]
    fn edge_width_walks_to_extrema() {
        let row = [0.0, 0.0, 10.0, 50.0, 90.0, 100.0, 100.0];
        assert_eq!(edge_width(&row, 3, true), 4);
        let falling: Vec<f64> = row.iter().rev().copied().collect();
        assert_eq!(edge_width(&falling, 3, false), 4);
    }

    #[test]
    fn feature_triple_static_clip() {
        let clip = VideoClip::new(
            "s",
            FrameRate::new(30, 1),
            vec![Plane::filled(64, 64, 40u8); 4],
            None,
        )
        .unwrap();
        let t = feature_triple(&clip, 2, &CpbdConfig::default()).unwrap();
        assert_eq!((t.si, t.ti, t.blur), (0.0, 0.0, 1.0));
        assert_eq!(t.degenerate_blur_frames, 2);
    }
}
